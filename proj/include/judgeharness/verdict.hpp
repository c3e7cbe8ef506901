#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

#include "judgeharness/error.hpp"

namespace judgeharness {

/// Outcome of one pairwise comparison. Serialized as "1", "2", "Tie".
enum class Verdict { Win1, Win2, Tie };

inline constexpr std::array<Verdict, 3> kAllVerdicts = {Verdict::Win1, Verdict::Win2,
                                                        Verdict::Tie};

inline std::string_view to_token(Verdict v) {
  switch (v) {
    case Verdict::Win1: return "1";
    case Verdict::Win2: return "2";
    case Verdict::Tie: return "Tie";
  }
  return "Tie";
}

inline std::size_t verdict_index(Verdict v) { return static_cast<std::size_t>(v); }

namespace detail {

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string_view trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace detail

inline std::optional<Verdict> try_normalize_verdict(std::string_view text) {
  const std::string token = detail::to_lower(detail::trim(text));
  if (token == "1") return Verdict::Win1;
  if (token == "2") return Verdict::Win2;
  if (token == "tie") return Verdict::Tie;
  return std::nullopt;
}

/// Case-insensitive mapping of a trimmed token onto the verdict enumeration.
inline Verdict normalize_verdict(std::string_view text) {
  if (auto v = try_normalize_verdict(text)) return *v;
  throw Error(Errc::UnrecognizedVerdict, "'" + std::string(text) + "'");
}

/// Remaps a verdict when the two responses trade places. Involutive.
constexpr Verdict flip_verdict(Verdict v) {
  switch (v) {
    case Verdict::Win1: return Verdict::Win2;
    case Verdict::Win2: return Verdict::Win1;
    case Verdict::Tie: return Verdict::Tie;
  }
  return v;
}

/// Which response is shown first. Swapped puts response_2 in the first slot.
enum class Order { Forward, Swapped };

inline std::string_view to_string(Order o) {
  return o == Order::Forward ? "Forward" : "Swapped";
}

inline Order parse_order(std::string_view s) {
  const std::string lower = detail::to_lower(detail::trim(s));
  if (lower == "forward") return Order::Forward;
  if (lower == "swapped") return Order::Swapped;
  throw Error(Errc::InvalidArgument, "unknown display order '" + std::string(s) + "'");
}

/// Maps a verdict expressed against the displayed order back to canonical orientation.
constexpr Verdict to_canonical(Verdict as_displayed, Order displayed) {
  return displayed == Order::Swapped ? flip_verdict(as_displayed) : as_displayed;
}

}  // namespace judgeharness
