// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>

#include "../support.hpp"
#include "judgeharness/analysis/graph.hpp"
#include "judgeharness/analysis/kappa.hpp"
#include "judgeharness/analysis/metrics.hpp"
#include "judgeharness/annotation.hpp"
#include "judgeharness/commands.hpp"
#include "judgeharness/debias.hpp"
#include "judgeharness/distill.hpp"
#include "judgeharness/oracles.hpp"
#include "judgeharness/tournament.hpp"

namespace fs = std::filesystem;
using namespace judgeharness;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
  std::vector<std::string> problems;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (problems.size() < 5) problems.push_back(what);
    }
  }
};

struct Criterion {
  int number;
  std::string title;
  double limit_seconds;  // <= 0: no limit
  std::function<Outcome()> run;
};

constexpr Verdict W1 = Verdict::Win1;
constexpr Verdict W2 = Verdict::Win2;
constexpr Verdict T = Verdict::Tie;

std::string random_text(std::mt19937& rng, int min_words, int max_words) {
  static const std::vector<std::string> words = {
      "apple", "river", "quantum", "blue",  "seven",  "engine", "garden", "silent", "orbit",
      "paper", "maple", "violet",  "storm", "copper", "lemon",  "north",  "pixel",  "harbor"};
  const int n = min_words + static_cast<int>(rng() % static_cast<unsigned>(max_words - min_words + 1));
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + words[rng() % words.size()];
  return s;
}

ComparisonTask random_task(std::mt19937& rng, int i) {
  auto t = jhtest::make_task("rt-" + std::to_string(i), "sys-a", random_text(rng, 1, 12), "sys-b",
                             random_text(rng, 1, 12), "Random instruction " + random_text(rng, 2, 5),
                             rng() % 2 ? random_text(rng, 0, 4) : "");
  if (t.response_1.text == t.response_2.text) t.response_2.text += " extra";
  return t;
}

JudgeFn as_judge(OracleFn fn) {
  return [fn = std::move(fn)](const std::string& prompt) { return fn("judge", prompt); };
}

// Human pairwise tallies must reproduce the known edges and ranking.
Outcome criterion_graph() {
  Outcome o;
  const auto table =
      analysis::tallies_from_json(Json::parse(read_file(jhtest::sample_data("tallies/human.json"))));
  const auto g = analysis::build_superiority_graph(table, 5);
  const auto rank = analysis::rank_systems(g);
  auto weight = [&](const std::string& w, const std::string& l) -> long {
    for (const auto& e : g.directed)
      if (e.winner == w && e.loser == l) return e.weight;
    return -1;
  };
  o.require(weight("LLaMA-7B", "Bloom-7B") == 44, "LLaMA->Bloom weight 44");
  o.require(weight("LLaMA-7B", "Cerebras-6.7B") == 56, "LLaMA->Cerebras weight 56");
  o.require(weight("LLaMA-7B", "OPT-7B") == 47, "LLaMA->OPT weight 47");
  o.require(weight("LLaMA-7B", "Pythia-6.9B") == 31, "LLaMA->Pythia weight 31");
  bool similar = false;
  for (const auto& e : g.similar)
    similar |= ((e.a == "Bloom-7B" && e.b == "Pythia-6.9B") || (e.a == "Pythia-6.9B" && e.b == "Bloom-7B")) &&
               std::abs(e.margin) == 2;
  o.require(similar, "Bloom-Pythia similar edge with |margin| 2");
  for (const auto& e : g.directed)
    o.require(!((e.winner == "Bloom-7B" && e.loser == "Pythia-6.9B") ||
                (e.winner == "Pythia-6.9B" && e.loser == "Bloom-7B")),
              "no directed Bloom/Pythia edge");
  o.require(g.acyclic, "graph is acyclic");
  o.require(!rank.order.empty() && rank.order.front() == "LLaMA-7B", "LLaMA ranked first");
  o.detail = std::to_string(g.directed.size()) + " directed, " + std::to_string(g.similar.size()) +
             " similar; ranking " + (rank.order.empty() ? "" : rank.order.front()) + " first";
  return o;
}

Outcome criterion_debias() {
  Outcome o;
  std::mt19937 rng(2024);
  std::vector<ComparisonTask> tasks;
  for (int i = 0; i < 1000; ++i) tasks.push_back(random_task(rng, i));
  const auto tmpl = default_template();

  // Two content preferences: response length, and an arbitrary hash order.
  const std::vector<std::pair<std::string, oracles::Preference>> prefs = {
      {"length", oracles::length_preference()},
      {"hash", [](std::string_view a, std::string_view b) {
         const auto ha = Sha256().field(a).hex();
         const auto hb = Sha256().field(b).hex();
         if (ha.substr(0, 1) == hb.substr(0, 1)) return 0;
         return ha < hb ? 1 : -1;
       }}};
  long checked = 0, invariant = 0;
  for (const auto& [name, pref] : prefs) {
    for (int level = 0; level <= 10; ++level) {
      const double bias = level / 10.0;
      const auto judge = as_judge(oracles::preference_judge(pref, bias, "acceptance-" + name));
      long ties = 0, conflicts = 0;
      for (const auto& t : tasks) {
        const auto a = debiased_compare(t, judge, tmpl);
        const auto b = debiased_compare(t.swapped(), judge, tmpl);
        ++checked;
        if (b.final_verdict == flip_verdict(a.final_verdict) && a.conflict == b.conflict) ++invariant;
        ties += a.final_verdict == T;
        conflicts += a.conflict;
      }
      if (level == 10)
        o.require(ties == static_cast<long>(tasks.size()), name + ": fully biased judge must give all Tie, got " +
                                                               std::to_string(ties));
      if (level == 0)
        o.require(conflicts == 0, name + ": position-blind judge had " + std::to_string(conflicts) + " conflicts");
    }
  }
  o.require(invariant == checked, "orientation invariance " + std::to_string(invariant) + "/" + std::to_string(checked));
  o.detail = std::to_string(invariant) + "/" + std::to_string(checked) + " flip-related over 22 judges";
  return o;
}

Outcome criterion_filter() {
  Outcome o;
  std::mt19937 rng(77);
  enum class Kind { Clean, InvalidBoth, InvalidOne, Recovered, SwapFlip, Duplicate };
  std::vector<ComparisonTask> tasks;
  std::map<std::string, Kind> kind;
  for (int i = 0; i < 600; ++i) {
    const int r = static_cast<int>(rng() % 10);
    const Kind k = r < 6 ? Kind::Clean
                   : r == 6 ? Kind::InvalidBoth
                   : r == 7 ? Kind::InvalidOne
                   : r == 8 ? Kind::Recovered
                            : Kind::SwapFlip;
    const std::string mode = std::to_string(static_cast<int>(k));
    const bool good_first = rng() % 2;
    const std::string good = "good answer " + std::to_string(i);
    const std::string weak = "weak answer " + std::to_string(i);
    auto t = jhtest::make_task("", "s1", good_first ? good : weak, "s2", good_first ? weak : good,
                               "Item " + std::to_string(i) + " mode " + mode);
    t.task_id = content_task_id(t.instruction, t.input, t.response_1, t.response_2);
    kind[t.task_id] = k;
    tasks.push_back(t);
  }

  // Consistent content judge with scripted faults keyed off the instruction.
  JudgeFn judge = [](const std::string& prompt) -> std::string {
    const auto [r1, r2] = oracles::extract_responses(prompt);
    const bool good_listed_first = r1.rfind("good", 0) == 0;
    const auto mode_pos = prompt.find(" mode ");
    const int mode = prompt[mode_pos + 6] - '0';
    switch (static_cast<Kind>(mode)) {
      case Kind::InvalidBoth: return "Both answers look interesting.";
      case Kind::InvalidOne:
        if (good_listed_first) return "Both answers look interesting.";
        break;
      case Kind::Recovered:
        return good_listed_first ? "Response 1 is better than response 2 since it is concise."
                                 : "I think response 2 is clearly better.";
      case Kind::SwapFlip: return oracles::format_judgement(W1, "first listed");
      default: break;
    }
    return oracles::format_judgement(good_listed_first ? W1 : W2, "the good answer");
  };
  auto run = distill(tasks, judge, "scripted-teacher", default_template(), 4);
  o.require(run.failures.empty(), "distillation had failures");
  auto candidates = run.candidates;
  std::set<std::size_t> dup_sources;
  for (std::size_t i = 0; i < candidates.size() && dup_sources.size() < 25; i += 7)
    if (kind[candidates[i].input.task_id] == Kind::Clean) dup_sources.insert(i);
  const std::size_t original = candidates.size();
  for (auto i : dup_sources) candidates.push_back(candidates[i]);
  std::vector<bool> injected(candidates.size());
  long injected_count = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    injected[i] = i >= original || kind[candidates[i].input.task_id] != Kind::Clean;
    injected_count += injected[i];
  }

  const auto res = filter_corpus(candidates);
  // filter_corpus preserves input order, so a sequential merge recovers
  // which candidate each kept or dropped record came from.
  std::vector<bool> dropped_flags(candidates.size(), false);
  for (std::size_t i = 0, ki = 0, di = 0; i < candidates.size(); ++i) {
    const auto cand = to_json(candidates[i]);
    if (ki < res.kept.size() && to_json(res.kept[ki]) == cand) {
      ++ki;
    } else if (di < res.dropped.size() && to_json(res.dropped[di].example) == cand) {
      dropped_flags[i] = true;
      ++di;
    } else {
      o.require(false, "filter output is not an order-preserving partition");
      break;
    }
  }
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const bool inj = injected[i];
    tp += inj && dropped_flags[i];
    fp += !inj && dropped_flags[i];
    fn += inj && !dropped_flags[i];
  }
  const double precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
  const double recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
  o.require(precision == 1.0 && recall == 1.0, "precision/recall on drops");
  o.require(res.kept.size() + res.dropped.size() == candidates.size(), "partition covers input");

  std::map<DropReason, long> expected_reasons, got_reasons;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i >= original) {
      ++expected_reasons[DropReason::DuplicateTaskId];
      continue;
    }
    switch (kind[candidates[i].input.task_id]) {
      case Kind::InvalidBoth:
      case Kind::InvalidOne:
      case Kind::Recovered: ++expected_reasons[DropReason::InvalidJudgeOutput]; break;
      case Kind::SwapFlip: ++expected_reasons[DropReason::SwapConflict]; break;
      default: break;
    }
  }
  for (const auto& d : res.dropped) ++got_reasons[d.reason];
  o.require(expected_reasons == got_reasons, "drop reasons match injected fault kinds");
  for (const auto& k : res.kept) o.require(kind[k.input.task_id] == Kind::Clean, "kept a faulty record");

  const auto again = filter_corpus(res.kept);
  o.require(again.dropped.empty() && again.kept.size() == res.kept.size(), "idempotent on kept set");
  bool same = again.kept.size() == res.kept.size();
  for (std::size_t i = 0; same && i < again.kept.size(); ++i)
    same = to_json(again.kept[i]) == to_json(res.kept[i]);
  o.require(same, "second pass keeps identical records");

  std::ostringstream d;
  d << candidates.size() << " candidates, " << injected_count << " injected, precision " << precision
    << " recall " << recall;
  o.detail = d.str();
  return o;
}

Outcome criterion_tournament() {
  Outcome o;
  const auto configs = enumerate_configs(SearchSpace{});
  o.require(configs.size() == 80, "default space has 80 configs");
  const std::vector<InstructionItem> validation = {{"Validation item 0", ""}, {"Validation item 1", ""},
                                                   {"Validation item 2", ""}};
  jhtest::TempDir tmp;
  ResponseCache cache(tmp / "generations.jsonl", ResponseCache::Mode::ReadWrite);
  BackendDescriptor gen;
  gen.backend_id = "ep*";
  gen.kind = BackendKind::ScriptedOracle;
  Gateway gw({gen});
  gw.register_oracle("ep*", oracles::tagged_generator());
  gw.set_cache(&cache);

  std::mt19937 rng(4242);
  int matched = 0;
  std::size_t total_rr = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::string> order;
    for (const auto& c : configs) order.push_back(c.config_id);
    std::shuffle(order.begin(), order.end(), rng);
    const auto oracle = oracles::preference_judge(oracles::ranked_preference(order));
    // Judge answers are memoized per prompt, so the tournament replays the
    // round-robin's responses instead of asking again.
    auto memo = std::make_shared<std::map<std::string, std::string>>();
    auto mu = std::make_shared<std::mutex>();
    JudgeFn judge = [oracle, memo, mu](const std::string& prompt) {
      {
        std::lock_guard lock(*mu);
        if (auto it = memo->find(prompt); it != memo->end()) return it->second;
      }
      auto text = oracle("judge", prompt);
      std::lock_guard lock(*mu);
      return memo->emplace(prompt, std::move(text)).first->second;
    };

    std::vector<int> wins(configs.size(), 0);
    for (std::size_t i = 0; i < configs.size(); ++i)
      for (std::size_t j = i + 1; j < configs.size(); ++j) {
        const auto d = duel(configs[i], configs[j], validation, gw, judge, default_template());
        ++wins[d.winner == configs[i].config_id ? i : j];
        ++total_rr;
      }
    const auto best = static_cast<std::size_t>(std::max_element(wins.begin(), wins.end()) - wins.begin());
    o.require(std::count(wins.begin(), wins.end(), wins[best]) == 1, "round-robin argmax is unique");

    const auto r = run_tournament(configs, 20, validation, gw, judge, default_template());
    o.require(r.complete, "tournament complete");
    o.require(r.duels.size() == 79, "trial " + std::to_string(trial) + ": " + std::to_string(r.duels.size()) +
                                        " duels");
    const bool ok = r.champion && r.champion->config_id == configs[best].config_id;
    o.require(ok, "trial " + std::to_string(trial) + ": champion differs from round-robin argmax");
    matched += ok;
  }
  o.detail = std::to_string(matched) + "/20 champions match round-robin argmax (" + std::to_string(total_rr) +
             " round-robin duels)";
  return o;
}

struct BruteMetrics {
  double accuracy = 0;
  std::map<Verdict, std::array<double, 3>> per_class;  // precision, recall, f1
  std::array<double, 3> macro{}, weighted{};
};

BruteMetrics brute_metrics(const std::vector<Verdict>& g, const std::vector<Verdict>& p) {
  BruteMetrics b;
  const double n = static_cast<double>(g.size());
  double correct = 0;
  for (std::size_t i = 0; i < g.size(); ++i) correct += g[i] == p[i];
  b.accuracy = correct / n;
  std::set<Verdict> present(g.begin(), g.end());
  present.insert(p.begin(), p.end());
  for (Verdict c : present) {
    double tp = 0, pred = 0, gold = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      tp += g[i] == c && p[i] == c;
      pred += p[i] == c;
      gold += g[i] == c;
    }
    const double pr = pred > 0 ? tp / pred : 0.0;
    const double rc = gold > 0 ? tp / gold : 0.0;
    const double f1 = pr + rc > 0 ? 2 * pr * rc / (pr + rc) : 0.0;
    b.per_class[c] = {pr, rc, f1};
    for (int k = 0; k < 3; ++k) {
      b.macro[k] += b.per_class[c][k] / static_cast<double>(present.size());
      b.weighted[k] += b.per_class[c][k] * gold / n;
    }
  }
  return b;
}

Outcome criterion_metrics() {
  Outcome o;
  const auto ex = analysis::classification_metrics({W1, W1, W2, T}, {W1, W2, W2, T});
  o.require(ex.accuracy == 0.75, "worked example accuracy 0.75");
  o.require(std::abs(ex.macro.f1 - 0.7778) < 5e-5, "worked example macro F1 0.7778");

  std::mt19937 rng(99);
  double worst = 0;
  const auto close = [&](double a, double b) {
    worst = std::max(worst, std::abs(a - b));
    return std::abs(a - b) <= 1e-12;
  };
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    std::vector<Verdict> g(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = kAllVerdicts[rng() % 3];
      p[i] = rng() % 3 == 0 ? g[i] : kAllVerdicts[rng() % 3];
    }
    const auto m = analysis::classification_metrics(g, p);
    const auto b = brute_metrics(g, p);
    bool ok = close(m.accuracy, b.accuracy) && close(m.macro.precision, b.macro[0]) &&
              close(m.macro.recall, b.macro[1]) && close(m.macro.f1, b.macro[2]) &&
              close(m.weighted.precision, b.weighted[0]) && close(m.weighted.recall, b.weighted[1]) &&
              close(m.weighted.f1, b.weighted[2]);
    for (const auto& [c, v] : b.per_class) {
      const auto& pc = m.per_class[verdict_index(c)];
      ok = ok && close(pc.precision, v[0]) && close(pc.recall, v[1]) && close(pc.f1, v[2]);
    }
    o.require(ok, "trial " + std::to_string(trial) + " deviates from brute force");
  }
  std::ostringstream d;
  d << "1000 instances, max deviation " << worst << "; worked example acc " << ex.accuracy << " macro F1 "
    << ex.macro.f1;
  o.detail = d.str();
  return o;
}

Outcome criterion_kappa() {
  Outcome o;
  using analysis::cohens_kappa;
  o.require(cohens_kappa<Verdict>({W1, W2, T, W1}, {W1, W2, T, W1}) == 1.0, "identical labels give 1");
  o.require(std::abs(cohens_kappa<Verdict>({W1, W1, W2, W2}, {W1, W2, W1, W2})) <= 1e-12,
            "[1,1,2,2] vs [1,2,1,2] gives 0");
  o.require(std::abs(cohens_kappa<Verdict>({W1, W1, W1, W2}, {W1, W1, W2, W2}) - 0.5) <= 1e-12,
            "[1,1,1,2] vs [1,1,2,2] gives 0.5");

  std::mt19937 rng(31337);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 40;
    std::vector<Verdict> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = kAllVerdicts[rng() % 3];
      b[i] = rng() % 2 ? a[i] : kAllVerdicts[rng() % 3];
    }
    std::array<Verdict, 3> perm = kAllVerdicts;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Verdict> ra(n), rb(n);
    for (std::size_t i = 0; i < n; ++i) {
      ra[i] = perm[verdict_index(a[i])];
      rb[i] = perm[verdict_index(b[i])];
    }
    const double k = cohens_kappa(a, b);
    const double kr = cohens_kappa(ra, rb);
    const double ks = cohens_kappa(b, a);
    worst = std::max({worst, std::abs(k - kr), std::abs(k - ks)});
    if (std::isnan(k)) continue;
    o.require(std::abs(k - kr) <= 1e-12, "relabeling changed kappa in trial " + std::to_string(trial));
    o.require(std::abs(k - ks) <= 1e-12, "kappa not symmetric in trial " + std::to_string(trial));
  }
  std::ostringstream d;
  d << "closed forms hold; 200 relabelings, max deviation " << worst;
  o.detail = d.str();
  return o;
}

// One pool: `truth` golds plus `splits` three-way splits, labeled by three
// annotators with a rotating dissenter on a share of majority tasks.
bool run_pool(Outcome& o, const std::string& name, long ties, long win1, long win2, long splits,
              unsigned seed, std::string* summary) {
  std::mt19937 rng(seed);
  std::vector<ComparisonTask> tasks;
  std::vector<std::optional<Verdict>> truth;
  auto add = [&](std::optional<Verdict> v, long count) {
    for (long i = 0; i < count; ++i) {
      const auto id = name + "-" + std::to_string(tasks.size());
      tasks.push_back(jhtest::make_task(id, "A", "first " + id, "B", "second " + id, "Prompt " + id));
      truth.push_back(v);
    }
  };
  add(T, ties);
  add(W1, win1);
  add(W2, win2);
  add(std::nullopt, splits);
  std::vector<std::size_t> perm(tasks.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<ComparisonTask> shuffled;
  std::vector<std::optional<Verdict>> shuffled_truth;
  for (auto i : perm) {
    shuffled.push_back(tasks[i]);
    shuffled_truth.push_back(truth[i]);
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < shuffled.size(); ++i) index[shuffled[i].task_id] = i;
  std::vector<int> dissent(shuffled.size());
  for (auto& d : dissent) d = rng() % 3 == 0 ? static_cast<int>(rng() % 3) : -1;

  annotation::StoreOptions opt;
  opt.clock = [] { return std::string("2024-01-01T00:00:00Z"); };
  annotation::AnnotationStore store(shuffled, {}, opt);
  const std::vector<std::string> annotators = {"ann-0", "ann-1", "ann-2"};
  bool progress = true;
  while (progress) {
    progress = false;
    for (std::size_t a = 0; a < annotators.size(); ++a) {
      std::optional<annotation::Assignment> as;
      try {
        as = store.assign_next(annotators[a]);
      } catch (const Error& e) {
        if (e.code() != Errc::NoTasksRemaining) throw;
        continue;
      }
      const auto i = index.at(as->task.task_id);
      Verdict v;
      if (!shuffled_truth[i]) {
        v = kAllVerdicts[a];
      } else if (dissent[i] == static_cast<int>(a)) {
        v = kAllVerdicts[(verdict_index(*shuffled_truth[i]) + 1 + rng() % 2) % 3];
      } else {
        v = *shuffled_truth[i];
      }
      const Verdict shown = as->displayed_order == Order::Forward ? v : flip_verdict(v);
      store.submit_label(annotators[a], as->task.task_id, shown, as->displayed_order);
      progress = true;
    }
  }
  const auto gold = store.derive_gold();
  bool ok = gold.labels.size() == shuffled.size() && gold.incomplete.empty();
  for (std::size_t i = 0; ok && i < gold.labels.size(); ++i) {
    const auto& g = gold.labels[i];
    const auto& want = shuffled_truth[index.at(g.task_id)];
    if (want) ok = g.gold && *g.gold == *want;
    else ok = !g.gold && g.exclusion == annotation::ExclusionReason::NoMajority;
  }
  o.require(ok, name + ": majority labels or exclusions wrong");
  const auto& d = gold.distribution;
  const bool dist_ok = d.ties == ties && d.win1 == win1 && d.win2 == win2 && d.excluded == splits;
  o.require(dist_ok, name + ": distribution counts");
  const auto expected_text = std::to_string(ties) + " ties, " + std::to_string(win1) + " Win1, " +
                             std::to_string(win2) + " Win2 (" + std::to_string(splits) + " excluded)";
  const auto json = annotation::to_json(gold).at("distribution");
  const bool fmt_ok = json.at("ties") == ties && json.at("win1") == win1 && json.at("win2") == win2 &&
                      json.at("excluded") == splits && json.at("summary") == expected_text;
  o.require(fmt_ok, name + ": emitted distribution '" + json.dump() + "'");
  if (summary) *summary = json.at("summary").get<std::string>();
  return ok && dist_ok && fmt_ok;
}

Outcome criterion_gold() {
  Outcome o;
  std::string headline;
  run_pool(o, "fixture", 105, 422, 472, 31, 5, &headline);
  std::mt19937 rng(6);
  for (int k = 0; k < 4; ++k)
    run_pool(o, "pool" + std::to_string(k), rng() % 40, rng() % 40, rng() % 40, rng() % 10, 100 + k, nullptr);
  o.detail = "fixture gold distribution: " + headline + "; 4 random pools";
  return o;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  return out;
}

Outcome criterion_replay() {
  Outcome o;
  jhtest::TempDir tmp;
  const fs::path cache = tmp / "cache.jsonl";
  cli::RunConfig base;
  base.config_path = jhtest::sample_data("harness.json");
  base.cache_path = cache;
  base.seed = "11";

  // Each command runs live first, then twice more against the warm cache:
  // once in read-only replay mode and once read-write with every call a hit.
  struct Step {
    std::string name;
    std::function<int(const cli::RunConfig&, std::ostream&)> fn;
  };
  const auto live = [&](const std::string& step) { return tmp / ("live-" + step); };
  std::vector<Step> steps;
  steps.push_back({"distill", [&](const cli::RunConfig& rc, std::ostream& out) {
                     cli::DistillOptions d;
                     d.instructions = jhtest::sample_data("instructions.jsonl");
                     d.systems = {"gen-llama", "gen-opt", "gen-bloom"};
                     d.judge = "judge-teacher";
                     return cli::cmd_distill(rc, d, out);
                   }});
  steps.push_back({"filter", [&](const cli::RunConfig& rc, std::ostream& out) {
                     return cli::cmd_filter(rc, {live("distill") / "candidates.jsonl"}, out);
                   }});
  steps.push_back({"export", [&](const cli::RunConfig& rc, std::ostream& out) {
                     cli::ExportOptions e;
                     e.kept = live("filter") / "kept.jsonl";
                     e.dropped = live("filter") / "dropped.jsonl";
                     return cli::cmd_export(rc, e, out);
                   }});
  steps.push_back({"judge", [&](const cli::RunConfig& rc, std::ostream& out) {
                     return cli::cmd_judge(rc, {live("distill") / "tasks.jsonl", "judge-length"}, out);
                   }});
  steps.push_back({"judge-strict", [&](const cli::RunConfig& rc, std::ostream& out) {
                     auto r = rc;
                     r.template_ref = "pairwise-strict";
                     return cli::cmd_judge(r, {live("distill") / "tasks.jsonl", "judge-teacher"}, out);
                   }});
  steps.push_back({"tournament", [&](const cli::RunConfig& rc, std::ostream& out) {
                     cli::TournamentOptions t;
                     t.validation = jhtest::sample_data("validation.jsonl");
                     t.judge = "judge-tournament";
                     return cli::cmd_tournament(rc, t, out);
                   }});
  steps.push_back({"analyze", [&](const cli::RunConfig& rc, std::ostream& out) {
                     cli::AnalyzeOptions a;
                     a.results = {live("judge") / "results.jsonl"};
                     a.gold = live("judge-strict") / "results.jsonl";
                     a.predictions = live("judge") / "results.jsonl";
                     return cli::cmd_analyze(rc, a, out);
                   }});

  int identical = 0;
  for (const auto& s : steps) {
    std::vector<std::pair<std::string, std::string>> runs;  // stdout per mode
    std::vector<std::map<std::string, std::string>> outputs;
    for (const std::string mode : {"live", "replay", "warm"}) {
      auto rc = base;
      rc.command = s.name;
      rc.out_dir = tmp / (mode + "-" + s.name);
      rc.replay = mode == "replay";
      std::ostringstream out;
      const int code = s.fn(rc, out);
      o.require(code == 0, s.name + " (" + mode + ") exited " + std::to_string(code));
      std::string text = out.str();
      // Paths of the output directory itself are the only expected difference.
      for (std::size_t p; (p = text.find(rc.out_dir.string())) != std::string::npos;)
        text.replace(p, rc.out_dir.string().size(), "<out>");
      runs.emplace_back(mode, text);
      outputs.push_back(snapshot(rc.out_dir));
    }
    const bool same = outputs[0] == outputs[1] && outputs[0] == outputs[2] && runs[0].second == runs[1].second &&
                      runs[0].second == runs[2].second && !outputs[0].empty();
    o.require(same, s.name + ": outputs differ between live and replayed runs");
    identical += same;
  }

  // Annotation event log: reopening the log reconstructs the same gold set.
  const auto log = tmp / "events.jsonl";
  std::vector<ComparisonTask> tasks;
  for (int i = 0; i < 30; ++i) {
    const auto id = "ann-task-" + std::to_string(i);
    tasks.push_back(jhtest::make_task(id, "A", "left " + id, "B", "right " + id));
  }
  annotation::StoreOptions opt;
  opt.clock = [] { return std::string("2024-01-01T00:00:00Z"); };
  std::string first_gold;
  {
    annotation::AnnotationStore store(tasks, log, opt);
    std::mt19937 rng(8);
    for (int round = 0; round < 90; ++round) {
      const std::string who = "ann-" + std::to_string(round % 3);
      try {
        const auto as = store.assign_next(who);
        if (round == 89) break;  // leave one assignment outstanding
        store.submit_label(who, as.task.task_id, kAllVerdicts[rng() % 3], as.displayed_order);
      } catch (const Error& e) {
        if (e.code() != Errc::NoTasksRemaining) throw;
      }
    }
    store.prune("ann-task-4", "ambiguous prompt");
    first_gold = annotation::to_json(store.derive_gold()).dump();
  }
  annotation::AnnotationStore reopened(tasks, log, opt);
  const bool gold_same = annotation::to_json(reopened.derive_gold()).dump() == first_gold;
  o.require(gold_same, "event-log replay changed the gold set");
  annotation::AnnotationStore third(tasks, log, opt);
  o.require(annotation::to_json(third.derive_gold()).dump() == first_gold, "second replay differs");

  o.detail = std::to_string(identical) + "/" + std::to_string(steps.size()) +
             " commands byte-identical across live, replay and warm reruns; event-log gold " +
             (gold_same ? "identical" : "differs");
  return o;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "human preference table to superiority graph", 1.0, criterion_graph},
      {2, "debiasing invariance", 10.0, criterion_debias},
      {3, "filter correctness", 5.0, criterion_filter},
      {4, "tournament optimality", 30.0, criterion_tournament},
      {5, "metrics oracle equivalence", 5.0, criterion_metrics},
      {6, "kappa closed forms and relabeling", 2.0, criterion_kappa},
      {7, "gold-set derivation", 5.0, criterion_gold},
      {8, "determinism and replay", 0.0, criterion_replay},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.ok = false;
      out.problems.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.limit_seconds <= 0 || secs < c.limit_seconds;
    const bool pass = out.ok && in_time;
    failed += !pass;
    std::ostringstream line;
    line.setf(std::ios::fixed);
    line.precision(3);
    line << (pass ? "PASS" : "FAIL") << " criterion " << c.number << ": " << c.title << " (" << secs << " s";
    if (c.limit_seconds > 0) line << ", limit " << c.limit_seconds << " s";
    line << ")";
    if (!out.detail.empty()) line << " - " << out.detail;
    std::cout << line.str() << "\n";
    if (!in_time) std::cout << "    over time limit\n";
    for (const auto& p : out.problems) std::cout << "    " << p << "\n";
    std::cout.flush();
  }
  return failed == 0 ? 0 : 1;
}
