#pragma once

#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "judgeharness/assessment.hpp"
#include "judgeharness/prompt.hpp"

namespace judgeharness {

namespace detail {

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }
  return lines;
}

inline bool istarts_with(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  return to_lower(s.substr(0, prefix.size())) == to_lower(prefix);
}

inline std::string_view strip_decoration(std::string_view s) {
  constexpr std::string_view deco = " \t*\"'`()[]";
  while (!s.empty() && deco.find(s.front()) != std::string_view::npos) s.remove_prefix(1);
  while (!s.empty() && (deco.find(s.back()) != std::string_view::npos ||
                        s.back() == '.' || s.back() == ':' || s.back() == '!'))
    s.remove_suffix(1);
  return s;
}

/// Verdict token on a line by itself, allowing markup and a grammar prefix.
inline std::optional<Verdict> strict_line_verdict(std::string_view line,
                                                  const OutputGrammar& g) {
  auto s = strip_decoration(line);
  for (const auto& prefix : g.verdict_prefixes) {
    if (istarts_with(s, prefix)) {
      s = strip_decoration(s.substr(prefix.size()));
      break;
    }
  }
  return try_normalize_verdict(s);
}

struct Sections {
  std::string reason;
  std::string reference;
  std::string scan_text;  // raw text minus the reference section
};

/// Reason/reference blocks start at a line beginning with their marker and run
/// until the other marker or the end of text. Either order is accepted.
inline Sections split_sections(std::string_view raw, const OutputGrammar& g) {
  Sections out;
  enum class Where { None, Reason, Reference } where = Where::None;
  std::string reason, reference;
  bool have_reason = false, have_reference = false;
  for (auto line : split_lines(raw)) {
    const auto t = trim(line);
    if (!g.reason_marker.empty() && istarts_with(t, g.reason_marker) && !have_reason) {
      where = Where::Reason;
      have_reason = true;
      reason += std::string(t.substr(g.reason_marker.size())) + "\n";
      out.scan_text += std::string(line) + "\n";
      continue;
    }
    if (!g.reference_marker.empty() && istarts_with(t, g.reference_marker) && !have_reference) {
      where = Where::Reference;
      have_reference = true;
      reference += std::string(t.substr(g.reference_marker.size())) + "\n";
      continue;
    }
    switch (where) {
      case Where::Reason:
        reason += std::string(line) + "\n";
        out.scan_text += std::string(line) + "\n";
        break;
      case Where::Reference: reference += std::string(line) + "\n"; break;
      case Where::None: out.scan_text += std::string(line) + "\n"; break;
    }
  }
  out.reason = std::string(trim(reason));
  out.reference = std::string(trim(reference));
  return out;
}

struct FallbackPatterns {
  std::vector<std::regex> win;
  std::vector<std::regex> tie;
};

inline const FallbackPatterns& fallback_patterns() {
  static const FallbackPatterns p = [] {
    const auto flags = std::regex::icase | std::regex::ECMAScript;
    const std::string noun = R"((?:response|answer|output|option|candidate))";
    const std::string num = R"(#?\s*\(?([12])\)?(?!\w|\.\d))";
    FallbackPatterns f;
    // "response 2 is (clearly) better"
    f.win.emplace_back(noun + R"(\s*)" + num +
                           R"(\s+(?:is|was|seems|appears)\s+(?:\w+\s+)?(?:better|superior|preferred|stronger|best|more\s+\w+))",
                       flags);
    // "the better response is 2", "winner: 2", "preferred response: 2"
    f.win.emplace_back(
        R"(\b(?:better|best|preferred|superior|stronger|winner|winning)\s*(?:response|answer|output|one|choice|option)?\s*(?:is|was|would be|:)?\s*(?:response|answer|output)?\s*)" +
            num,
        flags);
    // "I prefer response 1", "I would choose response 2"
    f.win.emplace_back(R"(\b(?:prefer|choose|pick|select)\s+(?:response|answer|output)?\s*)" + num,
                       flags);
    // "response 2 wins"
    f.win.emplace_back(noun + R"(\s*)" + num + R"(\s+wins\b)", flags);
    f.tie.emplace_back(R"(\btie\b)", flags);
    f.tie.emplace_back(R"(\bequally\s+(?:good|bad|strong|weak|helpful|well|correct|accurate))",
                       flags);
    f.tie.emplace_back(R"(\bsimilar\s+(?:in\s+)?quality\b)", flags);
    f.tie.emplace_back(R"(\bneither\s+(?:response\s+|answer\s+|one\s+)?is\s+(?:better|superior)\b)",
                       flags);
    return f;
  }();
  return p;
}

/// Scans free text for verdict evidence. Returns a verdict only when every
/// piece of evidence points the same way.
inline std::optional<Verdict> fallback_scan(std::string_view text, const OutputGrammar& g) {
  const auto& pats = fallback_patterns();
  const std::string s(text);
  std::set<Verdict> found;
  for (const auto& re : pats.win) {
    for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator();
         ++it)
      found.insert((*it)[1].str() == "1" ? Verdict::Win1 : Verdict::Win2);
  }
  for (const auto& re : pats.tie)
    if (std::regex_search(s, re)) found.insert(Verdict::Tie);
  if (found.empty()) {
    for (auto line : split_lines(text))
      if (auto v = strict_line_verdict(line, g)) found.insert(*v);
  }
  if (found.size() == 1) return *found.begin();
  return std::nullopt;
}

}  // namespace detail

/// Reads a judge completion. The verdict must sit on the first non-empty line
/// for a Parsed result; otherwise a phrase/token scan may recover it.
inline JudgeAssessment parse_assessment(std::string_view raw, const OutputGrammar& grammar) {
  JudgeAssessment a;
  a.raw_output = std::string(raw);
  const auto sections = detail::split_sections(raw, grammar);

  std::optional<Verdict> verdict;
  for (auto line : detail::split_lines(raw)) {
    if (detail::trim(line).empty()) continue;
    verdict = detail::strict_line_verdict(line, grammar);
    break;
  }
  if (verdict) {
    a.status = ParseStatus::Parsed;
  } else if ((verdict = detail::fallback_scan(sections.scan_text, grammar))) {
    a.status = ParseStatus::Recovered;
  } else {
    a.status = ParseStatus::Invalid;
    return a;
  }
  a.verdict = verdict;
  a.reason = sections.reason;
  a.reference_response = sections.reference;
  return a;
}

}  // namespace judgeharness
