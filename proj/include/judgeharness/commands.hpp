#pragma once

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "judgeharness/analysis/report.hpp"
#include "judgeharness/annotation.hpp"
#include "judgeharness/annotation_server.hpp"
#include "judgeharness/cache.hpp"
#include "judgeharness/debias.hpp"
#include "judgeharness/distill.hpp"
#include "judgeharness/gateway.hpp"
#include "judgeharness/http_transport.hpp"
#include "judgeharness/oracles.hpp"
#include "judgeharness/prompt.hpp"
#include "judgeharness/tournament.hpp"

namespace judgeharness::cli {

enum ExitCode : int {
  kSuccess = 0,
  kFatal = 1,
  kPartial = 2,
  kConfigError = 3,
  kBackendExhausted = 4,
};

/// Options shared by every command. Serialized into each run manifest.
struct RunConfig {
  std::string command;
  std::filesystem::path config_path;
  std::filesystem::path out_dir = "out";
  std::filesystem::path cache_path;  // empty: config file's "cache", else none
  bool replay = false;
  std::string seed = "0";
  std::size_t max_concurrent = 4;
  std::string template_ref;  // template id from the config, a file path, or empty for the default
  Json options = Json::object();
};

inline Json to_json(const RunConfig& rc) {
  // The cache mode is left out on purpose: results are content-addressed and
  // must not change bytes between a live run and a replay.
  return Json{{"command", rc.command},
              {"config", rc.config_path.string()},
              {"seed", rc.seed},
              {"max_concurrent", rc.max_concurrent},
              {"template", rc.template_ref},
              {"options", rc.options}};
}

/// Contents of the --config file.
struct HarnessConfig {
  std::vector<BackendDescriptor> backends;
  std::map<std::string, std::filesystem::path> templates;
  std::filesystem::path cache;
  std::optional<GenerationTemplate> generation;
};

inline HarnessConfig load_harness_config(const std::filesystem::path& path) {
  HarnessConfig cfg;
  if (path.empty()) return cfg;
  if (!std::filesystem::exists(path))
    throw Error(Errc::ConfigError, "config file " + path.string() + " not found");
  Json j;
  try {
    j = read_json(path);
  } catch (const Error& e) {
    throw Error(Errc::ConfigError, e.what());
  }
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() || base.empty() ? fp : base / fp;
  };
  try {
    const Json backends = j.value("backends", Json::array());
    for (const auto& b : backends) cfg.backends.push_back(backend_from_json(b));
    const Json templates = j.value("templates", Json::object());
    for (const auto& [id, p] : templates.items())
      cfg.templates[id] = resolve(p.get<std::string>());
    if (j.contains("cache")) cfg.cache = resolve(j.at("cache").get<std::string>());
    if (j.contains("generation_template")) {
      GenerationTemplate g;
      g.text = j.at("generation_template").value("text", g.text);
      g.no_input_text = j.at("generation_template").value("no_input_text", g.no_input_text);
      cfg.generation = g;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigError, path.string() + ": " + e.what());
  }
  return cfg;
}

/// Gateway, cache and template resolved for one command run.
struct Environment {
  HarnessConfig config;
  std::unique_ptr<ResponseCache> cache;
  std::unique_ptr<Gateway> gateway;
  PromptTemplate prompt_template;
  GenerationTemplate generation;
};

inline PromptTemplate resolve_template(const RunConfig& rc, const HarnessConfig& cfg) {
  const auto& ref = rc.template_ref;
  if (ref.empty() || ref == default_template().template_id) return default_template();
  if (auto it = cfg.templates.find(ref); it != cfg.templates.end()) return load_template(it->second);
  if (std::filesystem::exists(ref)) return load_template(ref);
  throw Error(Errc::ConfigError, "unknown template '" + ref + "'");
}

inline Environment make_environment(const RunConfig& rc) {
  Environment env;
  env.config = load_harness_config(rc.config_path);
  try {
    env.prompt_template = resolve_template(rc, env.config);
  } catch (const Error& e) {
    if (e.code() == Errc::TemplateError) throw Error(Errc::ConfigError, e.what());
    throw;
  }
  env.generation = env.config.generation.value_or(GenerationTemplate{});
  const auto cache_path = rc.cache_path.empty() ? env.config.cache : rc.cache_path;
  if (rc.replay && !cache_path.empty() && !std::filesystem::exists(cache_path))
    throw Error(Errc::ConfigError, "replay cache " + cache_path.string() + " does not exist");
  if (!cache_path.empty())
    env.cache = std::make_unique<ResponseCache>(
        cache_path, rc.replay ? ResponseCache::Mode::ReadOnly : ResponseCache::Mode::ReadWrite);
  else if (rc.replay)
    throw Error(Errc::ConfigError, "--replay needs a cache file");
  env.gateway = std::make_unique<Gateway>(env.config.backends, make_http_transport());
  env.gateway->set_oracle_factory(oracles::from_spec);
  env.gateway->set_cache(env.cache.get());
  env.gateway->set_replay_only(rc.replay);
  return env;
}

inline void require_backend(const Environment& env, const std::string& id) {
  if (!env.gateway->has_backend(id)) throw Error(Errc::ConfigError, "unknown backend '" + id + "'");
}

/// Writes a file under the output directory and records its digest.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::filesystem::path write(const std::string& name, const std::string& content) {
    const auto p = dir_ / name;
    write_file_atomic(p, content);
    digests_[name] = sha256_hex(content);
    return p;
  }

  void write_manifest(const RunConfig& rc, const Environment* env, Json extra = Json::object()) {
    Json m;
    m["format"] = "judgeharness.run.v1";
    m["run_config"] = to_json(rc);
    if (env) {
      Json backends = Json::array();
      for (const auto& b : env->config.backends) backends.push_back(to_json(b));
      m["backends"] = backends;
      m["template"] = {{"template_id", env->prompt_template.template_id},
                       {"digest", sha256_hex(render_template_file(env->prompt_template))}};
    }
    Json outs = Json::object();
    for (const auto& [k, v] : digests_) outs[k] = v;
    m["outputs"] = outs;
    for (const auto& [k, v] : extra.items()) m[k] = v;
    write_file_atomic(dir_ / "run_manifest.json", m.dump(2) + "\n");
  }

  const std::filesystem::path& path() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::string> digests_;
};

inline std::string results_jsonl(const std::vector<DebiasedResult>& results) {
  std::vector<Json> rows;
  rows.reserve(results.size());
  for (const auto& r : results) rows.push_back(to_json(r));
  return to_jsonl(rows);
}

inline Json failures_json(const std::vector<TaskFailure>& fs) {
  Json out = Json::array();
  for (const auto& f : fs)
    out.push_back({{"task_id", f.task_id}, {"error", std::string(errc_name(f.code))}, {"message", f.message}});
  return out;
}

inline int exit_for_failures(std::size_t ok, std::size_t failed) {
  if (failed == 0) return kSuccess;
  return ok == 0 ? kBackendExhausted : kPartial;
}

// ---------------------------------------------------------------------------

struct JudgeOptions {
  std::filesystem::path tasks;
  std::string judge;
};

inline int cmd_judge(const RunConfig& rc, const JudgeOptions& o, std::ostream& out) {
  auto env = make_environment(rc);
  require_backend(env, o.judge);
  const auto tasks = read_tasks(o.tasks);
  const auto run = judge_all(tasks, gateway_judge(*env.gateway, o.judge), env.prompt_template,
                             rc.max_concurrent);
  long w1 = 0, w2 = 0, tie = 0, conflicts = 0, invalid = 0, recovered = 0;
  for (const auto& r : run.results) {
    w1 += r.final_verdict == Verdict::Win1;
    w2 += r.final_verdict == Verdict::Win2;
    tie += r.final_verdict == Verdict::Tie;
    conflicts += r.conflict;
    invalid += r.invalid;
    recovered += r.recovered();
  }
  Json summary{{"tasks", tasks.size()}, {"judged", run.results.size()},
               {"failed", run.failures.size()}, {"win1", w1}, {"win2", w2}, {"tie", tie},
               {"conflicts", conflicts}, {"invalid", invalid}, {"recovered", recovered},
               {"failures", failures_json(run.failures)}};
  OutputDir dir(rc.out_dir);
  dir.write("results.jsonl", results_jsonl(run.results));
  dir.write("judge_summary.json", summary.dump(2) + "\n");
  dir.write_manifest(rc, &env);
  out << "judged " << run.results.size() << "/" << tasks.size() << " tasks  1=" << w1
      << " 2=" << w2 << " Tie=" << tie << " conflicts=" << conflicts << " invalid=" << invalid
      << " recovered=" << recovered << " failed=" << run.failures.size() << "\n";
  return exit_for_failures(run.results.size(), run.failures.size());
}

struct DistillOptions {
  std::filesystem::path instructions;  // paired through the generator systems
  std::filesystem::path tasks;         // or ready-made tasks
  std::vector<std::string> systems;
  std::string judge;
};

inline int cmd_distill(const RunConfig& rc, const DistillOptions& o, std::ostream& out) {
  auto env = make_environment(rc);
  require_backend(env, o.judge);
  std::vector<ComparisonTask> tasks;
  std::vector<IncompleteInstruction> incomplete;
  if (!o.tasks.empty()) {
    tasks = read_tasks(o.tasks);
  } else {
    for (const auto& s : o.systems) require_backend(env, s);
    auto pairs = build_pairs(read_instructions(o.instructions), o.systems, *env.gateway,
                             rc.max_concurrent, env.generation);
    tasks = std::move(pairs.tasks);
    incomplete = std::move(pairs.incomplete);
  }
  const auto run = distill(tasks, gateway_judge(*env.gateway, o.judge), o.judge,
                           env.prompt_template, rc.max_concurrent);
  Json inc = Json::array();
  for (const auto& i : incomplete)
    inc.push_back({{"instruction_index", i.index}, {"system", i.system}, {"message", i.message}});
  std::size_t invalid = 0;
  for (const auto& c : run.candidates) invalid += c.invalid();
  Json report{{"tasks", tasks.size()}, {"candidates", run.candidates.size()},
              {"flagged_invalid", invalid}, {"incomplete", inc},
              {"failures", failures_json(run.failures)}};
  OutputDir dir(rc.out_dir);
  std::vector<Json> task_rows;
  for (const auto& t : tasks) task_rows.push_back(to_json(t));
  dir.write("tasks.jsonl", to_jsonl(task_rows));
  dir.write("candidates.jsonl", candidates_jsonl(run.candidates));
  dir.write("distill_report.json", report.dump(2) + "\n");
  dir.write_manifest(rc, &env);
  out << "distilled " << run.candidates.size() << " candidates from " << tasks.size()
      << " tasks (" << invalid << " flagged invalid, " << run.failures.size() << " failed, "
      << incomplete.size() << " incomplete generations)\n";
  if (!incomplete.empty() && run.failures.empty()) return kPartial;
  return exit_for_failures(run.candidates.size(), run.failures.size());
}

struct FilterOptions {
  std::filesystem::path candidates;
};

inline int cmd_filter(const RunConfig& rc, const FilterOptions& o, std::ostream& out) {
  const auto result = filter_corpus(read_candidates(o.candidates));
  Json hist = Json::object();
  for (const auto& [k, v] : result.histogram()) hist[k] = v;
  Json report{{"kept", result.kept.size()}, {"dropped", result.dropped.size()},
              {"histogram", hist}, {"rules", filter_rules()}};
  OutputDir dir(rc.out_dir);
  dir.write("kept.jsonl", candidates_jsonl(result.kept));
  dir.write("dropped.jsonl", dropped_jsonl(result.dropped));
  dir.write("filter_report.json", report.dump(2) + "\n");
  dir.write_manifest(rc, nullptr);
  out << "kept " << result.kept.size() << ", dropped " << result.dropped.size() << "\n";
  for (const auto& [k, v] : result.histogram()) out << "  " << k << "=" << v << "\n";
  return kSuccess;
}

struct ExportOptions {
  std::filesystem::path kept;
  std::filesystem::path dropped;
  std::string name = "training.jsonl";
};

inline int cmd_export(const RunConfig& rc, const ExportOptions& o, std::ostream& out) {
  FilterResult corpus;
  corpus.kept = read_candidates(o.kept);
  if (!o.dropped.empty()) corpus.dropped = read_dropped(o.dropped);
  const auto res = export_training_file(corpus, rc.out_dir / o.name, to_json(rc));
  out << "exported " << corpus.kept.size() << " examples to " << res.data_path.string()
      << "\ncontent digest " << res.content_digest << "\n";
  return kSuccess;
}

struct TournamentOptions {
  std::filesystem::path space;  // empty: the default 80-configuration space
  std::filesystem::path validation;
  std::string judge;
  int duel_repeats = 1;
  double max_failure_fraction = 0.10;
};

inline int cmd_tournament(const RunConfig& rc, const TournamentOptions& o, std::ostream& out) {
  auto env = make_environment(rc);
  require_backend(env, o.judge);
  const SearchSpace space = o.space.empty() ? SearchSpace{} : search_space_from_json(read_json(o.space));
  const auto configs = enumerate_configs(space);
  for (const auto& c : configs) require_backend(env, c.backend_ref);
  const auto validation = read_instructions(o.validation);
  DuelOptions dopt;
  dopt.repeats = o.duel_repeats;
  dopt.max_failure_fraction = o.max_failure_fraction;
  dopt.workers = rc.max_concurrent;
  dopt.generation = env.generation;
  const auto result = run_tournament(configs, space.block_size, validation, *env.gateway,
                                     gateway_judge(*env.gateway, o.judge), env.prompt_template, dopt);
  std::vector<Json> rows;
  for (const auto& d : result.duels) rows.push_back(to_json(d));
  rows.push_back(tournament_summary(result));
  Json champion{{"champion", result.champion ? to_json(*result.champion) : Json(nullptr)},
                {"duels", result.duels.size()},
                {"configs", configs.size()},
                {"blocks", result.block_count},
                {"search_space", to_json(space)},
                {"validation_items", validation.size()},
                {"complete", result.complete}};
  OutputDir dir(rc.out_dir);
  dir.write("bracket.jsonl", to_jsonl(rows));
  dir.write("champion.json", champion.dump(2) + "\n");
  dir.write_manifest(rc, &env);
  out << "champion: " << (result.champion ? result.champion->config_id : std::string("(none)"))
      << "\nduels: " << result.duels.size() << "\n";
  if (!result.complete) {
    out << "bracket incomplete: " << result.abort_message << "\n";
    return kPartial;
  }
  return kSuccess;
}

struct AnalyzeOptions {
  std::vector<std::filesystem::path> results;
  std::filesystem::path tallies;
  long threshold = 5;
  std::filesystem::path gold;
  std::filesystem::path predictions;
  std::vector<std::filesystem::path> annotations;
  std::vector<std::string> system_order;
};

/// {"task_id","verdict"} JSONL. Also accepts result records (uses "final").
inline std::map<std::string, Verdict> read_verdict_file(const std::filesystem::path& path) {
  std::map<std::string, Verdict> out;
  for (const auto& j : read_jsonl(path)) {
    const auto id = j.at("task_id").get<std::string>();
    const auto v = j.contains("verdict") ? j.at("verdict") : j.at("final");
    out[id] = normalize_verdict(v.get<std::string>());
  }
  return out;
}

inline int cmd_analyze(const RunConfig& rc, const AnalyzeOptions& o, std::ostream& out) {
  using namespace analysis;
  OutputDir dir(rc.out_dir);
  Json summary = Json::object();
  std::map<std::string, Verdict> predictions;

  TallyTable table;
  long conflicts = 0;
  if (!o.tallies.empty()) table = tallies_from_json(read_json(o.tallies));
  for (const auto& path : o.results) {
    for (const auto& j : read_jsonl(path)) {
      const auto r = debiased_from_json(j);
      if (r.system_1.empty() || r.system_2.empty())
        throw Error(Errc::FormatError, path.string() + ": result " + r.task_id + " lacks system ids");
      table.add(r.system_1, r.system_2, r.final_verdict);
      conflicts += r.conflict;
      predictions[r.task_id] = r.final_verdict;
    }
  }
  if (!o.system_order.empty()) table.set_system_order(o.system_order);

  if (!table.empty()) {
    const auto g = build_superiority_graph(table, o.threshold);
    const auto rank = rank_systems(g);
    dir.write("tallies.json", to_json(table).dump(2) + "\n");
    dir.write("tallies.txt", tally_grid_text(table));
    dir.write("tallies.tsv", tally_tsv(table));
    dir.write("graph.json", to_json(g).dump(2) + "\n");
    dir.write("graph.dot", graph_dot(g));
    dir.write("graph.tsv", graph_edges_tsv(g));
    dir.write("ranking.json", to_json(rank).dump(2) + "\n");
    dir.write("ranking.txt", ranking_text(rank));
    out << tally_grid_text(table) << "\n" << graph_edges_tsv(g) << "\n" << ranking_text(rank);
    summary["conflicts"] = conflicts;
  }

  if (!o.gold.empty()) {
    const auto gold = read_verdict_file(o.gold);
    if (!o.predictions.empty()) predictions = read_verdict_file(o.predictions);
    std::vector<Verdict> g, p;
    long missing = 0;
    for (const auto& [id, v] : gold) {
      auto it = predictions.find(id);
      if (it == predictions.end()) {
        ++missing;
        continue;
      }
      g.push_back(v);
      p.push_back(it->second);
    }
    const auto m = classification_metrics(g, p);
    Json mj = to_json(m);
    mj["gold_without_prediction"] = missing;
    dir.write("metrics.json", mj.dump(2) + "\n");
    dir.write("metrics.txt", metrics_text(m));
    dir.write("metrics.tsv", metrics_tsv(m));
    out << "\n" << metrics_text(m);
  }

  if (!o.annotations.empty()) {
    std::map<std::string, std::map<std::string, Verdict>> by_annotator;
    for (const auto& path : o.annotations) {
      for (const auto& j : read_jsonl(path)) {
        const auto annotator = j.contains("annotator") ? j.at("annotator").get<std::string>()
                                                       : path.stem().string();
        by_annotator[annotator][j.at("task_id").get<std::string>()] =
            normalize_verdict(j.at("verdict").get<std::string>());
      }
    }
    const auto iaa = compute_iaa(by_annotator);
    dir.write("iaa.json", to_json(iaa).dump(2) + "\n");
    dir.write("iaa.txt", iaa_text(iaa));
    out << "\n" << iaa_text(iaa);
  }
  dir.write_manifest(rc, nullptr, Json{{"summary", summary}});
  return kSuccess;
}

struct ServeOptions {
  std::filesystem::path tasks;
  std::filesystem::path data_dir = "annotation-data";
  std::filesystem::path ui_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t labels_per_task = 3;
  double iaa_threshold = 0.85;
  /// Called once the socket is bound, with the bound port.
  std::function<void(annotation::AnnotationServer&, int)> on_started;
};

inline int cmd_serve(const RunConfig& rc, const ServeOptions& o, std::ostream& out) {
  annotation::StoreOptions sopt;
  sopt.seed = rc.seed;
  sopt.labels_per_task = o.labels_per_task;
  sopt.iaa_threshold = o.iaa_threshold;
  annotation::AnnotationStore store(read_tasks(o.tasks), o.data_dir / "events.jsonl", sopt);
  annotation::AnnotationServer server(store, o.ui_dir);
  const int port = server.bind(o.host, o.port);
  if (port < 0) {
    throw Error(Errc::IoError, "cannot bind " + o.host + ":" + std::to_string(o.port));
  }
  out << "serving " << store.tasks().size() << " tasks on http://" << o.host << ":" << port
      << " (event log " << (o.data_dir / "events.jsonl").string() << ")" << std::endl;
  std::thread notify([&] {
    server.wait_until_ready();
    if (o.on_started) o.on_started(server, port);
  });
  const bool ok = server.listen_after_bind();
  notify.join();
  return ok ? kSuccess : kFatal;
}

/// Maps library errors to the exit-code taxonomy.
inline int run_guarded(const std::function<int()>& fn, std::ostream& err = std::cerr) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    switch (e.code()) {
      case Errc::ConfigError:
      case Errc::TemplateError: return kConfigError;
      case Errc::BackendUnavailable:
      case Errc::CacheMiss: return kBackendExhausted;
      default: return kFatal;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFatal;
  }
}

}  // namespace judgeharness::cli
