#pragma once

#include <optional>
#include <string>

#include "judgeharness/jsonl.hpp"
#include "judgeharness/verdict.hpp"

namespace judgeharness {

/// Parsed: verdict on the first non-empty line. Recovered: found by the
/// fallback scan. Invalid: no verdict at all.
enum class ParseStatus { Parsed, Recovered, Invalid };

inline std::string_view to_string(ParseStatus s) {
  switch (s) {
    case ParseStatus::Parsed: return "Parsed";
    case ParseStatus::Recovered: return "Recovered";
    case ParseStatus::Invalid: return "Invalid";
  }
  return "Invalid";
}

inline ParseStatus parse_status_from(std::string_view s) {
  if (s == "Parsed") return ParseStatus::Parsed;
  if (s == "Recovered") return ParseStatus::Recovered;
  if (s == "Invalid") return ParseStatus::Invalid;
  throw Error(Errc::FormatError, "unknown parse status '" + std::string(s) + "'");
}

struct JudgeAssessment {
  std::optional<Verdict> verdict;  // absent iff status == Invalid
  std::string reason;
  std::string reference_response;
  std::string raw_output;
  ParseStatus status = ParseStatus::Invalid;

  bool usable() const { return status != ParseStatus::Invalid; }

  bool operator==(const JudgeAssessment&) const = default;
};

inline Json to_json(const JudgeAssessment& a) {
  Json j;
  j["verdict"] = a.verdict ? Json(std::string(to_token(*a.verdict))) : Json(nullptr);
  j["reason"] = a.reason;
  j["reference"] = a.reference_response;
  j["parse_status"] = std::string(to_string(a.status));
  j["raw"] = a.raw_output;
  return j;
}

inline JudgeAssessment assessment_from_json(const Json& j) {
  JudgeAssessment a;
  if (!j.at("verdict").is_null()) a.verdict = normalize_verdict(j.at("verdict").get<std::string>());
  a.reason = j.value("reason", std::string{});
  a.reference_response = j.value("reference", std::string{});
  a.raw_output = j.value("raw", std::string{});
  a.status = parse_status_from(j.at("parse_status").get<std::string>());
  return a;
}

}  // namespace judgeharness
