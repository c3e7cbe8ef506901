#include <csignal>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <thread>
#include <pthread.h>

#include "CLI11.hpp"
#include "judgeharness/commands.hpp"

namespace jh = judgeharness;
namespace cli = judgeharness::cli;
using judgeharness::Json;

namespace {

// SIGINT/SIGTERM are blocked process-wide and consumed by a watcher thread,
// so the server can be stopped outside of signal-handler context.
std::atomic<bool> g_serving_done{false};

void block_termination_signals(sigset_t& set) {
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"judgeharness: pairwise judge evaluation, distillation, tournaments and analysis"};
  app.require_subcommand(1);
  app.fallthrough();

  cli::RunConfig rc;
  std::string config_path;
  std::string out_dir = "out";
  std::string cache_path;
  app.add_option("--config", config_path, "Harness config (JSON); defaults to $JUDGEHARNESS_CONFIG");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--cache", cache_path, "Response cache file (JSONL)");
  app.add_flag("--replay", rc.replay, "Serve responses from the cache only; a miss is an error");
  app.add_option("--seed", rc.seed, "Seed for every seeded decision")->capture_default_str();
  app.add_option("--max-concurrent", rc.max_concurrent, "Worker threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--template", rc.template_ref, "Judge template id (from the config) or file");

  cli::JudgeOptions judge;
  std::string judge_tasks;
  auto* c_judge = app.add_subcommand("judge", "Judge tasks with swap debiasing");
  c_judge->add_option("--tasks", judge_tasks, "Tasks JSONL")->required();
  c_judge->add_option("--judge", judge.judge, "Judge backend id")->required();

  cli::DistillOptions distill;
  std::string distill_instr, distill_tasks;
  auto* c_distill = app.add_subcommand("distill", "Build pairs and collect teacher judgements");
  auto* o_instr = c_distill->add_option("--instructions", distill_instr, "Instructions JSONL");
  auto* o_dtasks = c_distill->add_option("--tasks", distill_tasks, "Prebuilt tasks JSONL");
  o_instr->excludes(o_dtasks);
  c_distill->add_option("--systems", distill.systems, "Generator backend ids")->delimiter(',');
  c_distill->add_option("--judge", distill.judge, "Teacher judge backend id")->required();

  cli::FilterOptions filter;
  std::string filter_in;
  auto* c_filter = app.add_subcommand("filter", "Drop duplicate, invalid and conflicting candidates");
  c_filter->add_option("--candidates", filter_in, "Candidates JSONL")->required();

  cli::ExportOptions exp;
  std::string exp_kept, exp_dropped;
  auto* c_export = app.add_subcommand("export", "Write the training file and its manifest");
  c_export->add_option("--kept", exp_kept, "Kept candidates JSONL")->required();
  c_export->add_option("--dropped", exp_dropped, "Dropped candidates JSONL");
  c_export->add_option("--name", exp.name, "Training file name")->capture_default_str();

  cli::TournamentOptions tour;
  std::string tour_space, tour_val;
  auto* c_tour = app.add_subcommand("tournament", "Block-wise knockout over fine-tuning configurations");
  c_tour->add_option("--space", tour_space, "Search space JSON (default: 80 configurations)");
  c_tour->add_option("--validation", tour_val, "Validation instructions JSONL")->required();
  c_tour->add_option("--judge", tour.judge, "Judge backend id")->required();
  c_tour->add_option("--duel-repeats", tour.duel_repeats)->check(CLI::PositiveNumber)->capture_default_str();
  c_tour->add_option("--max-failure-fraction", tour.max_failure_fraction)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  cli::AnalyzeOptions an;
  std::vector<std::string> an_results, an_annotations;
  std::string an_tallies, an_gold, an_pred;
  auto* c_an = app.add_subcommand("analyze", "Tallies, superiority graph, ranking, metrics, agreement");
  c_an->add_option("--results", an_results, "Judge results JSONL (repeatable)");
  c_an->add_option("--tallies", an_tallies, "Precomputed tallies JSON");
  c_an->add_option("--threshold", an.threshold, "Margin for a directed edge")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_an->add_option("--gold", an_gold, "Gold labels JSONL");
  c_an->add_option("--predictions", an_pred, "Predicted labels JSONL");
  c_an->add_option("--annotations", an_annotations, "Per-annotator label JSONL (repeatable)");
  c_an->add_option("--system-order", an.system_order, "Display order of systems")->delimiter(',');

  cli::ServeOptions serve;
  std::string serve_tasks, serve_data = "annotation-data", serve_ui;
  auto* c_serve = app.add_subcommand("serve", "Run the annotation HTTP API");
  c_serve->add_option("--tasks", serve_tasks, "Tasks JSONL")->required();
  c_serve->add_option("--data", serve_data, "Directory for the event log")->capture_default_str();
  c_serve->add_option("--ui", serve_ui, "Static UI directory");
  c_serve->add_option("--host", serve.host)->capture_default_str();
  c_serve->add_option("--port", serve.port)->capture_default_str();
  c_serve->add_option("--labels-per-task", serve.labels_per_task)->capture_default_str();
  c_serve->add_option("--iaa-threshold", serve.iaa_threshold)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kConfigError;
  }

  if (config_path.empty())
    if (const char* env = std::getenv("JUDGEHARNESS_CONFIG")) config_path = env;
  rc.config_path = config_path;
  rc.out_dir = out_dir;
  rc.cache_path = cache_path;

  auto* sub = app.get_subcommands().front();
  rc.command = sub->get_name();
  Json opts = Json::object();
  for (const auto* opt : sub->get_options()) {
    if (opt->get_name() == "--help" || opt->count() == 0) continue;
    const auto res = opt->results();
    opts[opt->get_name()] = res.size() == 1 ? Json(res.front()) : Json(res);
  }
  rc.options = opts;

  return cli::run_guarded([&]() -> int {
    if (sub == c_judge) {
      judge.tasks = judge_tasks;
      return cli::cmd_judge(rc, judge, std::cout);
    }
    if (sub == c_distill) {
      if (distill_instr.empty() && distill_tasks.empty())
        throw jh::Error(jh::Errc::ConfigError, "distill needs --instructions or --tasks");
      distill.instructions = distill_instr;
      distill.tasks = distill_tasks;
      return cli::cmd_distill(rc, distill, std::cout);
    }
    if (sub == c_filter) {
      filter.candidates = filter_in;
      return cli::cmd_filter(rc, filter, std::cout);
    }
    if (sub == c_export) {
      exp.kept = exp_kept;
      exp.dropped = exp_dropped;
      return cli::cmd_export(rc, exp, std::cout);
    }
    if (sub == c_tour) {
      tour.space = tour_space;
      tour.validation = tour_val;
      return cli::cmd_tournament(rc, tour, std::cout);
    }
    if (sub == c_an) {
      for (const auto& r : an_results) an.results.emplace_back(r);
      for (const auto& a : an_annotations) an.annotations.emplace_back(a);
      an.tallies = an_tallies;
      an.gold = an_gold;
      an.predictions = an_pred;
      return cli::cmd_analyze(rc, an, std::cout);
    }
    serve.tasks = serve_tasks;
    serve.data_dir = serve_data;
    serve.ui_dir = serve_ui;
    sigset_t set;
    block_termination_signals(set);
    std::thread watcher;
    jh::annotation::AnnotationServer* running = nullptr;
    std::mutex mu;
    serve.on_started = [&](jh::annotation::AnnotationServer& s, int) {
      std::lock_guard lock(mu);
      running = &s;
    };
    watcher = std::thread([&] {
      const timespec tick{0, 200'000'000};
      bool pending = false;
      while (!g_serving_done) {
        if (sigtimedwait(&set, nullptr, &tick) > 0) pending = true;
        if (pending) {
          std::lock_guard lock(mu);
          if (running) {
            running->stop();
            break;
          }
        }
      }
    });
    int rcode = cli::kFatal;
    try {
      rcode = cli::cmd_serve(rc, serve, std::cout);
    } catch (...) {
      g_serving_done = true;
      watcher.join();
      throw;
    }
    g_serving_done = true;
    watcher.join();
    return rcode;
  });
}
