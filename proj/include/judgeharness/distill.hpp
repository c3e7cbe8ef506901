#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "judgeharness/debias.hpp"
#include "judgeharness/gateway.hpp"
#include "judgeharness/jsonl.hpp"
#include "judgeharness/parallel.hpp"
#include "judgeharness/prompt.hpp"

namespace judgeharness {

struct InstructionItem {
  std::string instruction;
  std::string input;
};

inline std::vector<InstructionItem> read_instructions(const std::filesystem::path& path) {
  std::vector<InstructionItem> out;
  for (const auto& j : read_jsonl(path)) {
    try {
      out.push_back({j.at("instruction").get<std::string>(), j.value("input", std::string{})});
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::FormatError, path.string() + ": " + e.what());
    }
  }
  return out;
}

struct IncompleteInstruction {
  std::size_t index;
  std::string system;
  std::string message;
};

struct PairBuild {
  std::vector<ComparisonTask> tasks;
  std::vector<IncompleteInstruction> incomplete;
};

/// One task per unordered system pair per instruction, ordered by instruction
/// then lexicographic system pair. Systems that fail to generate for an
/// instruction are reported and left out of that instruction's pairs.
inline PairBuild build_pairs(const std::vector<InstructionItem>& instructions,
                             std::vector<std::string> systems, Gateway& gw,
                             std::size_t workers = 1, const GenerationTemplate& gen = {}) {
  std::sort(systems.begin(), systems.end());
  systems.erase(std::unique(systems.begin(), systems.end()), systems.end());
  if (systems.size() < 2)
    throw Error(Errc::InsufficientSystems, "need at least two distinct generator systems");
  if (instructions.empty()) throw Error(Errc::EmptyInput, "no instructions");

  const std::size_t ns = systems.size();
  std::vector<std::optional<std::string>> responses(instructions.size() * ns);
  std::vector<std::optional<IncompleteInstruction>> failures(responses.size());
  parallel_for(responses.size(), workers, [&](std::size_t k) {
    const auto& item = instructions[k / ns];
    const auto& sys = systems[k % ns];
    try {
      responses[k] = gw.complete(sys, build_generation_prompt(item.instruction, item.input, gen)).text;
    } catch (const Error& e) {
      if (e.code() == Errc::ConfigError) throw;
      failures[k] = IncompleteInstruction{k / ns, sys, e.what()};
    }
  });

  PairBuild out;
  for (std::size_t i = 0; i < instructions.size(); ++i) {
    for (std::size_t a = 0; a < ns; ++a) {
      for (std::size_t b = a + 1; b < ns; ++b) {
        const auto& ra = responses[i * ns + a];
        const auto& rb = responses[i * ns + b];
        if (!ra || !rb) continue;
        ComparisonTask t;
        t.instruction = instructions[i].instruction;
        t.input = instructions[i].input;
        t.response_1 = {*ra, systems[a]};
        t.response_2 = {*rb, systems[b]};
        t.task_id = content_task_id(t.instruction, t.input, t.response_1, t.response_2);
        out.tasks.push_back(std::move(t));
      }
    }
  }
  for (auto& f : failures)
    if (f) out.incomplete.push_back(std::move(*f));
  return out;
}

struct Provenance {
  std::string judge_id;
  std::string template_id;
  std::string forward_digest;
  std::string reverse_digest;
};

/// A distilled sample: input tuple, output tuple (result, reason, reference)
/// and the double-inference record it came from. Reason and reference come
/// from the forward pass, since the reverse pass talks about swapped positions.
struct TrainingExample {
  ComparisonTask input;
  Verdict result = Verdict::Tie;
  std::string reason;
  std::string reference;
  Provenance provenance;
  DebiasedResult debiased;

  bool invalid() const {
    return debiased.forward.status != ParseStatus::Parsed ||
           debiased.reverse.status != ParseStatus::Parsed;
  }
};

inline TrainingExample make_candidate(const ComparisonTask& t, DebiasedResult r,
                                      const std::string& judge_id,
                                      const std::string& template_id) {
  TrainingExample ex;
  ex.input = t;
  ex.result = r.final_verdict;
  ex.reason = r.forward.reason;
  ex.reference = r.forward.reference_response;
  ex.provenance = {judge_id, template_id, sha256_hex(r.forward.raw_output),
                   sha256_hex(r.reverse.raw_output)};
  ex.debiased = std::move(r);
  return ex;
}

struct DistillRun {
  std::vector<TrainingExample> candidates;
  std::vector<TaskFailure> failures;
};

inline DistillRun distill(const std::vector<ComparisonTask>& tasks, const JudgeFn& judge,
                          const std::string& judge_id, const PromptTemplate& p,
                          std::size_t workers = 1) {
  auto run = judge_all(tasks, judge, p, workers);
  DistillRun out;
  out.failures = std::move(run.failures);
  std::map<std::string, const ComparisonTask*> by_id;
  for (const auto& t : tasks) by_id.emplace(t.task_id, &t);
  for (auto& r : run.results) {
    const auto* t = by_id.at(r.task_id);
    out.candidates.push_back(make_candidate(*t, std::move(r), judge_id, p.template_id));
  }
  return out;
}

enum class DropReason { DuplicateTaskId, InvalidJudgeOutput, SwapConflict };

inline std::string_view to_string(DropReason r) {
  switch (r) {
    case DropReason::DuplicateTaskId: return "DuplicateTaskId";
    case DropReason::InvalidJudgeOutput: return "InvalidJudgeOutput";
    case DropReason::SwapConflict: return "SwapConflict";
  }
  return "Unknown";
}

inline DropReason drop_reason_from(std::string_view s) {
  if (s == "DuplicateTaskId") return DropReason::DuplicateTaskId;
  if (s == "InvalidJudgeOutput") return DropReason::InvalidJudgeOutput;
  if (s == "SwapConflict") return DropReason::SwapConflict;
  throw Error(Errc::FormatError, "unknown drop reason '" + std::string(s) + "'");
}

/// Rules applied by filter_corpus, in order. Listed in every manifest.
inline const std::vector<std::string>& filter_rules() {
  static const std::vector<std::string> rules = {
      "DuplicateTaskId: a task_id already seen earlier in the input is dropped (first kept)",
      "InvalidJudgeOutput: either pass did not parse with the verdict on its first line "
      "(Recovered and Invalid parses are both dropped)",
      "SwapConflict: forward and reverse verdicts disagree after mapping the reverse pass "
      "back to the original order",
  };
  return rules;
}

struct Dropped {
  TrainingExample example;
  DropReason reason;
};

struct FilterResult {
  std::vector<TrainingExample> kept;
  std::vector<Dropped> dropped;

  std::map<std::string, std::size_t> histogram() const {
    std::map<std::string, std::size_t> h;
    for (auto r : {DropReason::DuplicateTaskId, DropReason::InvalidJudgeOutput,
                   DropReason::SwapConflict})
      h[std::string(to_string(r))] = 0;
    for (const auto& d : dropped) ++h[std::string(to_string(d.reason))];
    return h;
  }
};

/// Partitions candidates into kept and dropped. Idempotent on its kept set.
inline FilterResult filter_corpus(const std::vector<TrainingExample>& candidates) {
  FilterResult out;
  std::set<std::string> seen;
  for (const auto& c : candidates) {
    if (!seen.insert(c.input.task_id).second) {
      out.dropped.push_back({c, DropReason::DuplicateTaskId});
    } else if (c.invalid()) {
      out.dropped.push_back({c, DropReason::InvalidJudgeOutput});
    } else if (c.debiased.conflict) {
      out.dropped.push_back({c, DropReason::SwapConflict});
    } else {
      out.kept.push_back(c);
    }
  }
  return out;
}

inline Json to_json(const TrainingExample& e) {
  return Json{{"task", to_json(e.input)},
              {"result", std::string(to_token(e.result))},
              {"reason", e.reason},
              {"reference", e.reference},
              {"provenance",
               {{"judge", e.provenance.judge_id},
                {"template", e.provenance.template_id},
                {"forward_digest", e.provenance.forward_digest},
                {"reverse_digest", e.provenance.reverse_digest}}},
              {"debiased", to_json(e.debiased)}};
}

inline TrainingExample candidate_from_json(const Json& j) {
  try {
    TrainingExample e;
    e.input = task_from_json(j.at("task"));
    e.result = normalize_verdict(j.at("result").get<std::string>());
    e.reason = j.value("reason", std::string{});
    e.reference = j.value("reference", std::string{});
    const auto& p = j.at("provenance");
    e.provenance = {p.value("judge", std::string{}), p.value("template", std::string{}),
                    p.value("forward_digest", std::string{}),
                    p.value("reverse_digest", std::string{})};
    e.debiased = debiased_from_json(j.at("debiased"));
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::FormatError, std::string("candidate record: ") + ex.what());
  }
}

inline std::vector<TrainingExample> read_candidates(const std::filesystem::path& path) {
  std::vector<TrainingExample> out;
  for (const auto& j : read_jsonl(path)) out.push_back(candidate_from_json(j));
  return out;
}

inline std::string candidates_jsonl(const std::vector<TrainingExample>& xs) {
  std::vector<Json> rows;
  rows.reserve(xs.size());
  for (const auto& x : xs) rows.push_back(to_json(x));
  return to_jsonl(rows);
}

inline std::string dropped_jsonl(const std::vector<Dropped>& xs) {
  std::vector<Json> rows;
  rows.reserve(xs.size());
  for (const auto& d : xs) {
    Json j = to_json(d.example);
    j["drop_reason"] = std::string(to_string(d.reason));
    rows.push_back(std::move(j));
  }
  return to_jsonl(rows);
}

inline std::vector<Dropped> read_dropped(const std::filesystem::path& path) {
  std::vector<Dropped> out;
  for (const auto& j : read_jsonl(path))
    out.push_back({candidate_from_json(j), drop_reason_from(j.at("drop_reason").get<std::string>())});
  return out;
}

struct ExportResult {
  std::filesystem::path data_path;
  std::filesystem::path manifest_path;
  std::string content_digest;
  Json manifest;
};

/// Writes the training JSONL (sorted by task_id) and `<name>.manifest.json`
/// next to it. Output bytes depend only on the inputs.
inline ExportResult export_training_file(const FilterResult& corpus,
                                         const std::filesystem::path& path,
                                         const Json& config_snapshot = Json::object()) {
  if (corpus.kept.empty()) throw Error(Errc::EmptyInput, "nothing to export");
  std::vector<const TrainingExample*> sorted;
  for (const auto& e : corpus.kept) sorted.push_back(&e);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) {
    return a->input.task_id < b->input.task_id;
  });
  std::vector<Json> rows;
  std::set<std::string> judges, templates;
  for (const auto* e : sorted) {
    rows.push_back(Json{{"instruction", e->input.instruction},
                        {"input", e->input.input},
                        {"response_1", e->input.response_1.text},
                        {"response_2", e->input.response_2.text},
                        {"result", std::string(to_token(e->result))},
                        {"reason", e->reason},
                        {"reference", e->reference}});
    judges.insert(e->provenance.judge_id);
    templates.insert(e->provenance.template_id);
  }
  const std::string data = to_jsonl(rows);
  ExportResult out;
  out.data_path = path;
  out.manifest_path = path;
  out.manifest_path += ".manifest.json";
  out.content_digest = sha256_hex(data);

  Json m;
  m["format"] = "judgeharness.training.v1";
  m["data_file"] = path.filename().string();
  m["content_digest"] = out.content_digest;
  m["kept"] = corpus.kept.size();
  m["dropped_total"] = corpus.dropped.size();
  Json hist = Json::object();
  for (const auto& [k, v] : corpus.histogram()) hist[k] = v;
  m["dropped"] = hist;
  m["judges"] = Json(std::vector<std::string>(judges.begin(), judges.end()));
  m["templates"] = Json(std::vector<std::string>(templates.begin(), templates.end()));
  m["filter_rules"] = filter_rules();
  m["reason_reference_source"] = "forward pass";
  m["config"] = config_snapshot;
  out.manifest = m;

  write_file_atomic(out.data_path, data);
  write_file_atomic(out.manifest_path, m.dump(2) + "\n");
  return out;
}

}  // namespace judgeharness
