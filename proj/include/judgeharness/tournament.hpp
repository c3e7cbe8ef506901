#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "judgeharness/debias.hpp"
#include "judgeharness/distill.hpp"
#include "judgeharness/gateway.hpp"

namespace judgeharness {

struct HyperparamConfig {
  std::string config_id;
  int epoch = 1;
  double learning_rate = 2e-5;
  std::string optimizer;
  std::string scheduler;
  std::string backend_ref;
  std::size_t index = 0;  // enumeration position, used for tie-breaks

  bool operator==(const HyperparamConfig&) const = default;
};

struct SearchSpace {
  std::vector<int> epochs = {1, 2, 3, 4, 5};
  std::vector<double> learning_rates = {2e-6, 1e-5, 2e-5, 2e-4};
  std::vector<std::string> optimizers = {"SGD", "AdamW"};
  std::vector<std::string> schedulers = {"cosine", "linear"};
  std::size_t block_size = 20;
  std::string backend_pattern = "{config_id}";
  /// When set, every axis value must come from the default closed sets.
  bool strict = true;

  std::size_t size() const {
    return epochs.size() * learning_rates.size() * optimizers.size() * schedulers.size();
  }
};

/// "2e-06" -> "2e-6"; keeps config ids short and stable.
/// Shortest scientific spelling that round-trips: 2e-05 -> "2e-5", 0.0002 -> "2e-4".
inline std::string lr_label(double lr) {
  char buf[40];
  for (int prec = 0; prec < 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*e", prec, lr);
    if (std::strtod(buf, nullptr) == lr) break;
  }
  std::string s = buf;
  const auto e = s.find('e');
  if (e == std::string::npos) return s;
  std::string mant = s.substr(0, e);
  std::string exp = s.substr(e + 1);
  std::string sign;
  if (!exp.empty() && (exp[0] == '-' || exp[0] == '+')) {
    if (exp[0] == '-') sign = "-";
    exp.erase(0, 1);
  }
  exp.erase(0, std::min(exp.find_first_not_of('0'), exp.size() - 1));
  return mant + "e" + sign + exp;
}

inline SearchSpace search_space_from_json(const Json& j) {
  SearchSpace s;
  try {
    if (j.contains("epochs")) s.epochs = j.at("epochs").get<std::vector<int>>();
    if (j.contains("learning_rates"))
      s.learning_rates = j.at("learning_rates").get<std::vector<double>>();
    if (j.contains("optimizers")) s.optimizers = j.at("optimizers").get<std::vector<std::string>>();
    if (j.contains("schedulers")) s.schedulers = j.at("schedulers").get<std::vector<std::string>>();
    s.block_size = j.value("block_size", s.block_size);
    s.backend_pattern = j.value("backend_pattern", s.backend_pattern);
    s.strict = j.value("strict", s.strict);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigError, std::string("search space: ") + e.what());
  }
  return s;
}

inline Json to_json(const SearchSpace& s) {
  return Json{{"epochs", s.epochs},
              {"learning_rates", s.learning_rates},
              {"optimizers", s.optimizers},
              {"schedulers", s.schedulers},
              {"block_size", s.block_size},
              {"backend_pattern", s.backend_pattern},
              {"strict", s.strict}};
}

/// Lexicographic product over (epoch, learning rate, optimizer, scheduler),
/// each axis in its listed order.
inline std::vector<HyperparamConfig> enumerate_configs(const SearchSpace& s) {
  if (s.epochs.empty()) throw Error(Errc::EmptyAxis, "epochs");
  if (s.learning_rates.empty()) throw Error(Errc::EmptyAxis, "learning_rates");
  if (s.optimizers.empty()) throw Error(Errc::EmptyAxis, "optimizers");
  if (s.schedulers.empty()) throw Error(Errc::EmptyAxis, "schedulers");
  if (s.strict) {
    const SearchSpace defaults;
    auto check = [](const auto& values, const auto& allowed, const char* axis) {
      for (const auto& v : values)
        if (std::find(allowed.begin(), allowed.end(), v) == allowed.end())
          throw Error(Errc::ConfigError,
                      std::string(axis) + " value outside the default set (set strict=false)");
    };
    check(s.epochs, defaults.epochs, "epochs");
    check(s.learning_rates, defaults.learning_rates, "learning_rates");
    check(s.optimizers, defaults.optimizers, "optimizers");
    check(s.schedulers, defaults.schedulers, "schedulers");
  }
  std::vector<HyperparamConfig> out;
  out.reserve(s.size());
  for (int ep : s.epochs)
    for (double lr : s.learning_rates)
      for (const auto& opt : s.optimizers)
        for (const auto& sch : s.schedulers) {
          HyperparamConfig c;
          c.epoch = ep;
          c.learning_rate = lr;
          c.optimizer = opt;
          c.scheduler = sch;
          c.config_id = "ep" + std::to_string(ep) + "-lr" + lr_label(lr) + "-" +
                        detail::to_lower(opt) + "-" + detail::to_lower(sch);
          c.backend_ref = detail::substitute(s.backend_pattern, {{"config_id", c.config_id}});
          c.index = out.size();
          out.push_back(std::move(c));
        }
  std::set<std::string> ids;
  for (const auto& c : out)
    if (!ids.insert(c.config_id).second)
      throw Error(Errc::ConfigError, "duplicate axis values produce config " + c.config_id);
  return out;
}

/// Contiguous, order-preserving chunks; the last one may be short.
inline std::vector<std::vector<HyperparamConfig>> partition_blocks(
    const std::vector<HyperparamConfig>& configs, std::size_t block_size) {
  if (block_size < 1) throw Error(Errc::InvalidArgument, "block_size must be >= 1");
  std::vector<std::vector<HyperparamConfig>> blocks;
  for (std::size_t i = 0; i < configs.size(); i += block_size)
    blocks.emplace_back(configs.begin() + static_cast<std::ptrdiff_t>(i),
                        configs.begin() + static_cast<std::ptrdiff_t>(std::min(i + block_size, configs.size())));
  return blocks;
}

struct DuelOptions {
  double max_failure_fraction = 0.10;
  int repeats = 1;
  std::size_t workers = 1;
  GenerationTemplate generation;
};

struct DuelRecord {
  std::size_t duel_index = 0;
  std::string stage;  // "block-<n>" or "final"
  HyperparamConfig config_a;
  HyperparamConfig config_b;
  std::vector<Verdict> verdicts;  // per validation item, a is response 1
  int wins_a = 0;
  int losses_a = 0;
  int ties = 0;
  int conflicts = 0;
  int failures = 0;
  int score_a = 0;
  std::string winner;
  bool unstable = false;
  std::vector<std::string> repeat_winners;
};

/// Positive score: a wins; negative: b wins; zero: the earlier-enumerated config.
inline const HyperparamConfig& duel_winner(const HyperparamConfig& a, const HyperparamConfig& b,
                                           int score_a) {
  if (score_a > 0) return a;
  if (score_a < 0) return b;
  return a.index <= b.index ? a : b;
}

namespace detail {

inline DuelRecord duel_once(const HyperparamConfig& a, const HyperparamConfig& b,
                            const std::vector<InstructionItem>& validation, Gateway& gw,
                            const JudgeFn& judge, const PromptTemplate& tmpl,
                            const DuelOptions& opt) {
  DuelRecord rec;
  rec.config_a = a;
  rec.config_b = b;
  const std::size_t n = validation.size();
  std::vector<Verdict> verdicts(n, Verdict::Tie);
  std::vector<char> failed(n, 0), conflict(n, 0);
  parallel_for(n, opt.workers, [&](std::size_t i) {
    try {
      const auto prompt =
          build_generation_prompt(validation[i].instruction, validation[i].input, opt.generation);
      ComparisonTask t;
      t.instruction = validation[i].instruction;
      t.input = validation[i].input;
      t.response_1 = {gw.complete(a.backend_ref, prompt).text, a.config_id};
      t.response_2 = {gw.complete(b.backend_ref, prompt).text, b.config_id};
      t.task_id = content_task_id(t.instruction, t.input, t.response_1, t.response_2);
      const auto r = debiased_compare(t, judge, tmpl);
      verdicts[i] = r.final_verdict;
      conflict[i] = r.conflict;
    } catch (const Error& e) {
      if (e.code() == Errc::ConfigError) throw;
      failed[i] = 1;  // counted as a tie
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    rec.failures += failed[i];
    rec.conflicts += conflict[i];
    switch (verdicts[i]) {
      case Verdict::Win1: ++rec.wins_a; break;
      case Verdict::Win2: ++rec.losses_a; break;
      case Verdict::Tie: ++rec.ties; break;
    }
  }
  if (n > 0 && static_cast<double>(rec.failures) > opt.max_failure_fraction * static_cast<double>(n))
    throw Error(Errc::DuelAborted, a.config_id + " vs " + b.config_id + ": " +
                                       std::to_string(rec.failures) + "/" + std::to_string(n) +
                                       " items failed");
  rec.verdicts = std::move(verdicts);
  rec.score_a = rec.wins_a - rec.losses_a;
  rec.winner = duel_winner(a, b, rec.score_a).config_id;
  return rec;
}

}  // namespace detail

/// Compares two configurations over the validation set. With repeats > 1 the
/// whole duel is re-run; disagreeing winners mark the duel unstable and the
/// incumbent (earlier config) is kept.
inline DuelRecord duel(const HyperparamConfig& a, const HyperparamConfig& b,
                       const std::vector<InstructionItem>& validation, Gateway& gw,
                       const JudgeFn& judge, const PromptTemplate& tmpl,
                       const DuelOptions& opt = {}) {
  DuelRecord rec = detail::duel_once(a, b, validation, gw, judge, tmpl, opt);
  rec.repeat_winners.push_back(rec.winner);
  for (int r = 1; r < opt.repeats; ++r) {
    const auto again = detail::duel_once(a, b, validation, gw, judge, tmpl, opt);
    rec.repeat_winners.push_back(again.winner);
    if (again.winner != rec.winner) rec.unstable = true;
  }
  if (rec.unstable) rec.winner = (a.index <= b.index ? a : b).config_id;
  return rec;
}

inline Json to_json(const HyperparamConfig& c) {
  return Json{{"config_id", c.config_id}, {"epoch", c.epoch},
              {"learning_rate", c.learning_rate}, {"optimizer", c.optimizer},
              {"scheduler", c.scheduler}, {"backend_ref", c.backend_ref},
              {"index", c.index}};
}

inline HyperparamConfig config_from_json(const Json& j) {
  HyperparamConfig c;
  c.config_id = j.at("config_id").get<std::string>();
  c.epoch = j.at("epoch").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.optimizer = j.at("optimizer").get<std::string>();
  c.scheduler = j.at("scheduler").get<std::string>();
  c.backend_ref = j.value("backend_ref", std::string{});
  c.index = j.at("index").get<std::size_t>();
  return c;
}

inline Json to_json(const DuelRecord& d) {
  std::vector<std::string> v;
  v.reserve(d.verdicts.size());
  for (auto x : d.verdicts) v.emplace_back(to_token(x));
  return Json{{"type", "duel"},
              {"duel_index", d.duel_index},
              {"stage", d.stage},
              {"config_a", to_json(d.config_a)},
              {"config_b", to_json(d.config_b)},
              {"wins_a", d.wins_a},
              {"losses_a", d.losses_a},
              {"ties", d.ties},
              {"conflicts", d.conflicts},
              {"failures", d.failures},
              {"score_a", d.score_a},
              {"winner", d.winner},
              {"unstable", d.unstable},
              {"repeat_winners", d.repeat_winners},
              {"verdicts", v}};
}

inline DuelRecord duel_from_json(const Json& j) {
  DuelRecord d;
  d.duel_index = j.at("duel_index").get<std::size_t>();
  d.stage = j.at("stage").get<std::string>();
  d.config_a = config_from_json(j.at("config_a"));
  d.config_b = config_from_json(j.at("config_b"));
  d.wins_a = j.at("wins_a").get<int>();
  d.losses_a = j.at("losses_a").get<int>();
  d.ties = j.at("ties").get<int>();
  d.conflicts = j.value("conflicts", 0);
  d.failures = j.value("failures", 0);
  d.score_a = j.at("score_a").get<int>();
  d.winner = j.at("winner").get<std::string>();
  d.unstable = j.value("unstable", false);
  if (j.contains("repeat_winners"))
    d.repeat_winners = j.at("repeat_winners").get<std::vector<std::string>>();
  for (const auto& v : j.value("verdicts", Json::array()))
    d.verdicts.push_back(normalize_verdict(v.get<std::string>()));
  return d;
}

struct TournamentResult {
  std::optional<HyperparamConfig> champion;
  std::vector<HyperparamConfig> block_winners;
  std::vector<DuelRecord> duels;
  std::size_t block_count = 0;
  bool complete = true;
  std::string abort_message;
};

/// Winner-stays ladder inside each block, then a ladder over the block
/// winners. n configs always cost n - 1 duels. A duel abort stops the run
/// and leaves the partial bracket in the result.
inline TournamentResult run_tournament(const std::vector<HyperparamConfig>& configs,
                                       std::size_t block_size,
                                       const std::vector<InstructionItem>& validation,
                                       Gateway& gw, const JudgeFn& judge,
                                       const PromptTemplate& tmpl, const DuelOptions& opt = {}) {
  TournamentResult out;
  if (configs.empty()) return out;
  const auto blocks = partition_blocks(configs, block_size);
  out.block_count = blocks.size();

  auto ladder = [&](const std::vector<HyperparamConfig>& entrants,
                    const std::string& stage) -> HyperparamConfig {
    HyperparamConfig current = entrants.front();
    for (std::size_t i = 1; i < entrants.size(); ++i) {
      DuelRecord d = duel(current, entrants[i], validation, gw, judge, tmpl, opt);
      d.duel_index = out.duels.size();
      d.stage = stage;
      if (d.winner != current.config_id) current = entrants[i];
      out.duels.push_back(std::move(d));
    }
    return current;
  };

  try {
    for (std::size_t b = 0; b < blocks.size(); ++b)
      out.block_winners.push_back(ladder(blocks[b], "block-" + std::to_string(b)));
    out.champion = ladder(out.block_winners, "final");
  } catch (const Error& e) {
    if (e.code() != Errc::DuelAborted) throw;
    out.complete = false;
    out.abort_message = e.what();
  }
  return out;
}

/// Re-derives the champion from a bracket log: each duel's winner is
/// recomputed from its score and the ladder chain is checked for continuity.
inline std::optional<std::string> champion_from_log(const std::vector<DuelRecord>& log) {
  if (log.empty()) return std::nullopt;
  std::optional<std::string> current;
  std::string stage;
  for (const auto& d : log) {
    const auto& w = d.unstable ? (d.config_a.index <= d.config_b.index ? d.config_a : d.config_b)
                               : duel_winner(d.config_a, d.config_b, d.score_a);
    if (w.config_id != d.winner)
      throw Error(Errc::FormatError, "duel " + std::to_string(d.duel_index) + " winner mismatch");
    if (d.stage == stage && current && d.config_a.config_id != *current)
      throw Error(Errc::FormatError, "duel " + std::to_string(d.duel_index) + " breaks the ladder");
    stage = d.stage;
    current = w.config_id;
  }
  return current;
}

inline Json tournament_summary(const TournamentResult& r) {
  Json j{{"type", "summary"},
         {"champion", r.champion ? Json(r.champion->config_id) : Json(nullptr)},
         {"duels", r.duels.size()},
         {"blocks", r.block_count},
         {"complete", r.complete}};
  std::vector<std::string> bw;
  for (const auto& c : r.block_winners) bw.push_back(c.config_id);
  j["block_winners"] = bw;
  if (!r.complete) j["abort"] = r.abort_message;
  return j;
}

}  // namespace judgeharness
