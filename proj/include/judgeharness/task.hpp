#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "judgeharness/digest.hpp"
#include "judgeharness/error.hpp"
#include "judgeharness/jsonl.hpp"
#include "judgeharness/verdict.hpp"

namespace judgeharness {

struct Response {
  std::string text;
  std::string system;

  bool operator==(const Response&) const = default;
};

/// One evaluation unit: an instruction, optional input and two attributed responses.
struct ComparisonTask {
  std::string task_id;
  std::string instruction;
  std::string input;
  Response response_1;
  Response response_2;

  bool operator==(const ComparisonTask&) const = default;

  /// The same task with the two responses exchanged.
  ComparisonTask swapped() const {
    ComparisonTask t = *this;
    std::swap(t.response_1, t.response_2);
    return t;
  }
};

/// Content hash over the fields that identify a task; stable across runs.
inline std::string content_task_id(std::string_view instruction, std::string_view input,
                                   const Response& r1, const Response& r2) {
  Sha256 h;
  h.field(instruction).field(input).field(r1.system).field(r1.text).field(r2.system).field(
      r2.text);
  return h.hex().substr(0, 16);
}

enum class ViolationKind {
  MissingTaskId,
  EmptyInstruction,
  MissingSourceSystem,
  DuplicateSourceSystem,
  EmptyResponse,
};

enum class Severity { Error, Warning };

struct Violation {
  ViolationKind kind;
  Severity severity;
  std::string detail;
};

inline std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::MissingTaskId: return "MissingTaskId";
    case ViolationKind::EmptyInstruction: return "EmptyInstruction";
    case ViolationKind::MissingSourceSystem: return "MissingSourceSystem";
    case ViolationKind::DuplicateSourceSystem: return "DuplicateSourceSystem";
    case ViolationKind::EmptyResponse: return "EmptyResponse";
  }
  return "Unknown";
}

/// Report-style validation. Empty responses are warnings: generators do emit
/// empty strings and the judge still has to rule on them.
inline std::vector<Violation> validate_task(const ComparisonTask& t) {
  std::vector<Violation> out;
  if (t.task_id.empty())
    out.push_back({ViolationKind::MissingTaskId, Severity::Error, "task_id is empty"});
  if (detail::trim(t.instruction).empty())
    out.push_back({ViolationKind::EmptyInstruction, Severity::Error, "instruction is empty"});
  if (t.response_1.system.empty() || t.response_2.system.empty())
    out.push_back(
        {ViolationKind::MissingSourceSystem, Severity::Error, "response source system missing"});
  else if (t.response_1.system == t.response_2.system)
    out.push_back({ViolationKind::DuplicateSourceSystem, Severity::Error,
                   "both responses come from '" + t.response_1.system + "'"});
  if (t.response_1.text.empty())
    out.push_back({ViolationKind::EmptyResponse, Severity::Warning, "response_1 is empty"});
  if (t.response_2.text.empty())
    out.push_back({ViolationKind::EmptyResponse, Severity::Warning, "response_2 is empty"});
  return out;
}

inline bool has_errors(const std::vector<Violation>& report) {
  for (const auto& v : report)
    if (v.severity == Severity::Error) return true;
  return false;
}

inline Json to_json(const ComparisonTask& t) {
  return Json{{"task_id", t.task_id},
              {"instruction", t.instruction},
              {"input", t.input},
              {"response_1", {{"text", t.response_1.text}, {"system", t.response_1.system}}},
              {"response_2", {{"text", t.response_2.text}, {"system", t.response_2.system}}}};
}

inline ComparisonTask task_from_json(const Json& j) {
  try {
    ComparisonTask t;
    t.task_id = j.at("task_id").get<std::string>();
    t.instruction = j.at("instruction").get<std::string>();
    t.input = j.value("input", std::string{});
    t.response_1.text = j.at("response_1").at("text").get<std::string>();
    t.response_1.system = j.at("response_1").at("system").get<std::string>();
    t.response_2.text = j.at("response_2").at("text").get<std::string>();
    t.response_2.system = j.at("response_2").at("system").get<std::string>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, std::string("task record: ") + e.what());
  }
}

/// Loads a task JSONL file; rejects duplicate ids and tasks with error-level violations.
inline std::vector<ComparisonTask> read_tasks(const std::filesystem::path& path) {
  std::vector<ComparisonTask> tasks;
  std::set<std::string> seen;
  for (const auto& j : read_jsonl(path)) {
    auto t = task_from_json(j);
    if (!seen.insert(t.task_id).second)
      throw Error(Errc::FormatError, path.string() + ": duplicate task_id " + t.task_id);
    const auto report = validate_task(t);
    if (has_errors(report)) {
      std::string msg;
      for (const auto& v : report)
        if (v.severity == Severity::Error) msg += std::string(to_string(v.kind)) + " ";
      throw Error(Errc::FormatError, path.string() + ": task " + t.task_id + ": " + msg);
    }
    tasks.push_back(std::move(t));
  }
  return tasks;
}

inline void write_tasks(const std::filesystem::path& path,
                        const std::vector<ComparisonTask>& tasks) {
  std::vector<Json> rows;
  rows.reserve(tasks.size());
  for (const auto& t : tasks) rows.push_back(to_json(t));
  write_file_atomic(path, to_jsonl(rows));
}

}  // namespace judgeharness
