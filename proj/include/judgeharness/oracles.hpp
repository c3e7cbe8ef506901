#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "judgeharness/digest.hpp"
#include "judgeharness/gateway.hpp"
#include "judgeharness/verdict.hpp"

namespace judgeharness::oracles {

struct ResponseMarkers {
  std::string first = "### Response 1:";
  std::string second = "### Response 2:";
};

/// Pulls the two response bodies out of a rendered judge prompt.
inline std::pair<std::string, std::string> extract_responses(std::string_view prompt,
                                                             const ResponseMarkers& m = {}) {
  const auto p1 = prompt.find(m.first);
  const auto p2 = prompt.find(m.second, p1 == std::string_view::npos ? 0 : p1);
  if (p1 == std::string_view::npos || p2 == std::string_view::npos) return {};
  auto first = prompt.substr(p1 + m.first.size(), p2 - p1 - m.first.size());
  auto rest = prompt.substr(p2 + m.second.size());
  const auto next = rest.find("\n\n###");
  auto second = next == std::string_view::npos ? rest : rest.substr(0, next);
  const auto cut = second.find("\n\nAnswer in exactly");
  if (cut != std::string_view::npos) second = second.substr(0, cut);
  return {std::string(detail::trim(first)), std::string(detail::trim(second))};
}

inline std::string format_judgement(Verdict v, std::string_view reason) {
  return std::string(to_token(v)) + "\nReason: " + std::string(reason) + "\nReference: n/a";
}

/// Content preference: >0 when the first argument is better, <0 when the second is, 0 for a tie.
using Preference = std::function<int(std::string_view first, std::string_view second)>;

/// A scripted judge. With probability `position_bias` (decided per unordered
/// response pair, so both passes of one task agree on it) the judge ignores
/// content and prefers whichever response is listed first.
inline OracleFn preference_judge(Preference pref, double position_bias = 0.0,
                                 std::string seed = "0", ResponseMarkers markers = {}) {
  return [pref = std::move(pref), position_bias, seed = std::move(seed),
          markers = std::move(markers)](const std::string&, const std::string& prompt) {
    const auto [r1, r2] = extract_responses(prompt, markers);
    if (position_bias > 0.0) {
      const auto& lo = r1 < r2 ? r1 : r2;
      const auto& hi = r1 < r2 ? r2 : r1;
      const std::string key = Sha256().field(seed).field(lo).field(hi).hex();
      if (unit_hash(key) < position_bias)
        return format_judgement(Verdict::Win1, "the first response is preferred");
    }
    const int p = pref(r1, r2);
    if (p > 0) return format_judgement(Verdict::Win1, "response 1 ranks higher");
    if (p < 0) return format_judgement(Verdict::Win2, "response 2 ranks higher");
    return format_judgement(Verdict::Tie, "responses are of similar quality");
  };
}

/// Finds the `[system=ID]` tag that tagged generators put in their responses.
inline std::string system_tag(std::string_view response) {
  static const std::regex re(R"(\[system=([^\]]+)\])");
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(response.begin(), response.end(), m, re)) return m[1].str();
  return {};
}

/// Prefers the response whose system tag comes earlier in `order`. Untagged
/// or unknown systems rank below every listed one.
inline Preference ranked_preference(std::vector<std::string> order) {
  std::map<std::string, std::size_t> rank;
  for (std::size_t i = 0; i < order.size(); ++i) rank.emplace(order[i], i);
  return [rank = std::move(rank)](std::string_view a, std::string_view b) {
    auto pos = [&](std::string_view r) {
      auto it = rank.find(system_tag(r));
      return it == rank.end() ? rank.size() : it->second;
    };
    const auto pa = pos(a), pb = pos(b);
    return pa < pb ? 1 : (pa > pb ? -1 : 0);
  };
}

inline Preference length_preference() {
  return [](std::string_view a, std::string_view b) {
    return a.size() > b.size() ? 1 : (a.size() < b.size() ? -1 : 0);
  };
}

/// Generator oracle: tags each response with the serving backend id and a
/// short digest of the prompt, so different instructions get different text.
inline OracleFn tagged_generator(std::string prefix = {}) {
  return [prefix = std::move(prefix)](const std::string& backend_id, const std::string& prompt) {
    return prefix + "[system=" + backend_id + "] answer " + sha256_hex(prompt).substr(0, 12);
  };
}

inline OracleFn constant(std::string text) {
  return [text = std::move(text)](const std::string&, const std::string&) { return text; };
}

/// Builds an oracle from its config spec, e.g.
/// {"policy":"ranked","order":["a","b"],"position_bias":0.2,"seed":"7"}.
/// Policies: constant, prefer_first, tagged, ranked, length.
inline OracleFn from_spec(const Json& spec) {
  const auto policy = spec.value("policy", std::string{});
  const double bias = spec.value("position_bias", 0.0);
  const std::string seed = spec.contains("seed") ? spec.at("seed").dump() : "0";
  ResponseMarkers markers;
  if (spec.contains("markers")) {
    markers.first = spec.at("markers").at(0).get<std::string>();
    markers.second = spec.at("markers").at(1).get<std::string>();
  }
  if (policy == "constant") return constant(spec.at("text").get<std::string>());
  if (policy == "prefer_first")
    return constant(format_judgement(Verdict::Win1, "the first response is preferred"));
  if (policy == "tagged") return tagged_generator(spec.value("prefix", std::string{}));
  if (policy == "ranked")
    return preference_judge(ranked_preference(spec.at("order").get<std::vector<std::string>>()),
                            bias, seed, markers);
  if (policy == "length") return preference_judge(length_preference(), bias, seed, markers);
  throw Error(Errc::ConfigError, "unknown oracle policy '" + policy + "'");
}

}  // namespace judgeharness::oracles
