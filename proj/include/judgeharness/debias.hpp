#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "judgeharness/assessment.hpp"
#include "judgeharness/gateway.hpp"
#include "judgeharness/parallel.hpp"
#include "judgeharness/parse.hpp"
#include "judgeharness/prompt.hpp"
#include "judgeharness/task.hpp"

namespace judgeharness {

/// A judge backend as seen by the protocol: prompt in, completion text out.
using JudgeFn = std::function<std::string(const std::string& prompt)>;

inline JudgeFn gateway_judge(Gateway& gw, std::string backend_id) {
  return [&gw, id = std::move(backend_id)](const std::string& prompt) {
    return gw.complete(id, prompt).text;
  };
}

/// Result of judging one task twice with the response order exchanged.
/// `reverse.verdict` is already mapped back to the original orientation.
struct DebiasedResult {
  std::string task_id;
  std::string system_1;
  std::string system_2;
  JudgeAssessment forward;
  JudgeAssessment reverse;
  Verdict final_verdict = Verdict::Tie;
  bool conflict = false;
  bool invalid = false;  // a pass produced no usable verdict

  /// Either pass only recovered its verdict via the fallback scan.
  bool recovered() const {
    return forward.status == ParseStatus::Recovered || reverse.status == ParseStatus::Recovered;
  }
};

/// Strict agreement: any disagreement between the passes, Tie-vs-Win
/// included, resolves to Tie. An unusable pass also yields Tie.
inline DebiasedResult combine_passes(const ComparisonTask& t, JudgeAssessment forward,
                                     JudgeAssessment reverse_as_judged) {
  DebiasedResult r;
  r.task_id = t.task_id;
  r.system_1 = t.response_1.system;
  r.system_2 = t.response_2.system;
  r.forward = std::move(forward);
  r.reverse = std::move(reverse_as_judged);
  if (r.reverse.verdict) r.reverse.verdict = flip_verdict(*r.reverse.verdict);
  if (!r.forward.usable() || !r.reverse.usable()) {
    r.invalid = true;
    r.conflict = true;
    r.final_verdict = Verdict::Tie;
    return r;
  }
  r.conflict = *r.forward.verdict != *r.reverse.verdict;
  r.final_verdict = r.conflict ? Verdict::Tie : *r.forward.verdict;
  return r;
}

inline DebiasedResult debiased_compare(const ComparisonTask& t, const JudgeFn& judge,
                                       const PromptTemplate& p) {
  const auto fwd_raw = judge(build_prompt(t, p, Order::Forward));
  const auto rev_raw = judge(build_prompt(t, p, Order::Swapped));
  return combine_passes(t, parse_assessment(fwd_raw, p.grammar),
                        parse_assessment(rev_raw, p.grammar));
}

inline Json to_json(const DebiasedResult& r) {
  Json j;
  j["task_id"] = r.task_id;
  j["system_1"] = r.system_1;
  j["system_2"] = r.system_2;
  j["final"] = std::string(to_token(r.final_verdict));
  j["conflict"] = r.conflict;
  j["invalid"] = r.invalid;
  j["forward"] = to_json(r.forward);
  j["reverse"] = to_json(r.reverse);
  return j;
}

inline DebiasedResult debiased_from_json(const Json& j) {
  try {
    DebiasedResult r;
    r.task_id = j.at("task_id").get<std::string>();
    r.system_1 = j.value("system_1", std::string{});
    r.system_2 = j.value("system_2", std::string{});
    r.final_verdict = normalize_verdict(j.at("final").get<std::string>());
    r.conflict = j.at("conflict").get<bool>();
    r.invalid = j.value("invalid", false);
    r.forward = assessment_from_json(j.at("forward"));
    r.reverse = assessment_from_json(j.at("reverse"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, std::string("result record: ") + e.what());
  }
}

struct TaskFailure {
  std::string task_id;
  Errc code;
  std::string message;
};

struct JudgeRun {
  std::vector<DebiasedResult> results;  // task order, failed tasks omitted
  std::vector<TaskFailure> failures;
};

/// Judges every task, `workers` at a time. Backend exhaustion on one task is
/// recorded and the run continues.
inline JudgeRun judge_all(const std::vector<ComparisonTask>& tasks, const JudgeFn& judge,
                          const PromptTemplate& p, std::size_t workers) {
  std::vector<std::optional<DebiasedResult>> slots(tasks.size());
  std::vector<std::optional<TaskFailure>> errors(tasks.size());
  parallel_for(tasks.size(), workers, [&](std::size_t i) {
    try {
      slots[i] = debiased_compare(tasks[i], judge, p);
    } catch (const Error& e) {
      if (e.code() != Errc::BackendUnavailable && e.code() != Errc::CacheMiss &&
          e.code() != Errc::ExtractionError)
        throw;
      errors[i] = TaskFailure{tasks[i].task_id, e.code(), e.what()};
    }
  });
  JudgeRun run;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (slots[i]) run.results.push_back(std::move(*slots[i]));
    if (errors[i]) run.failures.push_back(std::move(*errors[i]));
  }
  return run;
}

}  // namespace judgeharness
