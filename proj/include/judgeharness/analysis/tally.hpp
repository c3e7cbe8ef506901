#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "judgeharness/error.hpp"
#include "judgeharness/jsonl.hpp"
#include "judgeharness/verdict.hpp"

namespace judgeharness::analysis {

/// (win, lose, tie) counts of system_a against system_b.
struct PairwiseTally {
  std::string system_a;
  std::string system_b;
  long wins = 0;
  long losses = 0;
  long ties = 0;

  long total() const { return wins + losses + ties; }
  long margin() const { return wins - losses; }
  PairwiseTally reversed() const { return {system_b, system_a, losses, wins, ties}; }

  bool operator==(const PairwiseTally&) const = default;
};

struct VerdictRecord {
  std::string system_a;  // the system in the response_1 slot
  std::string system_b;
  Verdict verdict;
};

/// Tallies stored once per unordered pair; get() returns either orientation.
class TallyTable {
 public:
  void add(const std::string& a, const std::string& b, Verdict v) {
    PairwiseTally t{a, b, 0, 0, 0};
    if (v == Verdict::Win1) t.wins = 1;
    else if (v == Verdict::Win2) t.losses = 1;
    else t.ties = 1;
    add(t);
  }

  void add(const PairwiseTally& t) {
    if (t.system_a == t.system_b)
      throw Error(Errc::InvalidArgument, "tally of '" + t.system_a + "' against itself");
    if (t.wins < 0 || t.losses < 0 || t.ties < 0)
      throw Error(Errc::InvalidArgument, "negative tally count");
    note_system(t.system_a);
    note_system(t.system_b);
    const auto canon = t.system_a < t.system_b ? t : t.reversed();
    auto [it, inserted] = pairs_.try_emplace({canon.system_a, canon.system_b}, canon);
    if (!inserted) {
      it->second.wins += canon.wins;
      it->second.losses += canon.losses;
      it->second.ties += canon.ties;
    }
  }

  /// Tally of a against b; a zero tally when the pair was never judged.
  PairwiseTally get(const std::string& a, const std::string& b) const {
    const bool flip = b < a;
    auto it = pairs_.find(flip ? std::make_pair(b, a) : std::make_pair(a, b));
    if (it == pairs_.end()) return {a, b, 0, 0, 0};
    return flip ? it->second.reversed() : it->second;
  }

  bool contains(const std::string& a, const std::string& b) const {
    return pairs_.count(b < a ? std::make_pair(b, a) : std::make_pair(a, b)) > 0;
  }

  /// Systems in first-seen order.
  const std::vector<std::string>& systems() const { return systems_; }

  /// One tally per unordered pair, oriented with system_a < system_b.
  std::vector<PairwiseTally> pairs() const {
    std::vector<PairwiseTally> out;
    for (const auto& [k, v] : pairs_) out.push_back(v);
    return out;
  }

  bool empty() const { return pairs_.empty(); }
  std::size_t size() const { return pairs_.size(); }

  void set_system_order(const std::vector<std::string>& order) {
    std::vector<std::string> merged;
    for (const auto& s : order)
      if (std::find(merged.begin(), merged.end(), s) == merged.end()) merged.push_back(s);
    for (const auto& s : systems_)
      if (std::find(merged.begin(), merged.end(), s) == merged.end()) merged.push_back(s);
    systems_ = std::move(merged);
  }

 private:
  void note_system(const std::string& s) {
    if (std::find(systems_.begin(), systems_.end(), s) == systems_.end()) systems_.push_back(s);
  }

  std::map<std::pair<std::string, std::string>, PairwiseTally> pairs_;
  std::vector<std::string> systems_;
};

inline TallyTable tally_pairs(const std::vector<VerdictRecord>& records) {
  TallyTable t;
  for (const auto& r : records) t.add(r.system_a, r.system_b, r.verdict);
  return t;
}

inline Json to_json(const PairwiseTally& t) {
  return Json{{"system_a", t.system_a}, {"system_b", t.system_b}, {"wins", t.wins},
              {"losses", t.losses}, {"ties", t.ties}};
}

/// Tally document: {"systems":[...], "tallies":[{system_a, system_b, wins, losses, ties}]}.
/// A pair given in both orientations must agree under role swap; it is counted once.
inline TallyTable tallies_from_json(const Json& j) {
  TallyTable out;
  try {
    for (const auto& row : j.at("tallies")) {
      PairwiseTally t{row.at("system_a").get<std::string>(), row.at("system_b").get<std::string>(),
                      row.at("wins").get<long>(), row.at("losses").get<long>(),
                      row.at("ties").get<long>()};
      if (out.contains(t.system_a, t.system_b)) {
        if (out.get(t.system_a, t.system_b) != t)
          throw Error(Errc::FormatError, "inconsistent tallies for " + t.system_a + " vs " +
                                             t.system_b);
        continue;
      }
      out.add(t);
    }
    if (j.contains("systems")) out.set_system_order(j.at("systems").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, std::string("tally document: ") + e.what());
  }
  return out;
}

inline Json to_json(const TallyTable& t) {
  Json rows = Json::array();
  for (const auto& p : t.pairs()) rows.push_back(to_json(p));
  return Json{{"systems", t.systems()}, {"tallies", rows}};
}

}  // namespace judgeharness::analysis
