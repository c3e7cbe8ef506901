#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "judgeharness/analysis/kappa.hpp"
#include "judgeharness/cache.hpp"
#include "judgeharness/digest.hpp"
#include "judgeharness/jsonl.hpp"
#include "judgeharness/task.hpp"

namespace judgeharness::annotation {

/// One annotator's label, stored in canonical (Forward) orientation.
struct AnnotationRecord {
  std::string task_id;
  std::string annotator_id;
  Verdict verdict = Verdict::Tie;
  Order displayed_order = Order::Forward;
  Verdict verdict_as_displayed = Verdict::Tie;
  std::string timestamp;
};

enum class ExclusionReason { NoMajority, ManualPrune };

inline std::string_view to_string(ExclusionReason r) {
  return r == ExclusionReason::NoMajority ? "NoMajority" : "ManualPrune";
}

struct GoldLabel {
  std::string task_id;
  std::optional<Verdict> gold;  // absent iff excluded
  std::array<int, 3> votes{};   // indexed by verdict_index()
  std::optional<ExclusionReason> exclusion;
};

/// Strict-majority vote over a task's labels; no majority means exclusion.
inline GoldLabel vote(const std::string& task_id, const std::vector<Verdict>& labels) {
  GoldLabel g;
  g.task_id = task_id;
  for (auto v : labels) ++g.votes[verdict_index(v)];
  for (auto v : kAllVerdicts)
    if (2 * g.votes[verdict_index(v)] > static_cast<int>(labels.size())) g.gold = v;
  if (!g.gold) g.exclusion = ExclusionReason::NoMajority;
  return g;
}

struct Assignment {
  ComparisonTask task;
  Order displayed_order = Order::Forward;
  std::string order_token;  // opaque stand-in for displayed_order handed to the UI
};

struct PruneSuggestion {
  std::string task_id;
  double mean_kappa_without = 0.0;
  double improvement = 0.0;
};

struct KappaWarning {
  std::string annotator;
  double mean_kappa = 0.0;
  std::vector<PruneSuggestion> suggestions;  // greedy, best first; advisory only
};

struct GoldDistribution {
  long ties = 0;
  long win1 = 0;
  long win2 = 0;
  long excluded = 0;
};

struct GoldDerivation {
  std::vector<GoldLabel> labels;         // complete tasks, task order
  std::vector<std::string> incomplete;   // fewer labels than required, skipped
  analysis::IaaReport iaa;               // over tasks with a gold label
  std::vector<KappaWarning> warnings;
  GoldDistribution distribution;
};

struct StoreOptions {
  std::size_t labels_per_task = 3;
  std::string seed = "0";
  double iaa_threshold = 0.85;
  std::size_t max_suggestions = 10;
  std::function<std::string()> clock = utc_timestamp;
};

/// Task assignment, label collection and gold derivation. State is derived
/// from an append-only JSONL event log (assign, label, prune events), so
/// reopening the log reconstructs it exactly.
class AnnotationStore {
 public:
  AnnotationStore(std::vector<ComparisonTask> tasks, std::filesystem::path event_log = {},
                  StoreOptions opt = {})
      : tasks_(std::move(tasks)), log_path_(std::move(event_log)), opt_(std::move(opt)) {
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      if (!task_index_.emplace(tasks_[i].task_id, i).second)
        throw Error(Errc::FormatError, "duplicate task_id " + tasks_[i].task_id);
    }
    if (!log_path_.empty() && std::filesystem::exists(log_path_)) replay_log();
  }

  const std::vector<ComparisonTask>& tasks() const { return tasks_; }
  const StoreOptions& options() const { return opt_; }

  Order display_order_for(const std::string& task_id, const std::string& annotator) const {
    const auto key = Sha256().field(opt_.seed).field(task_id).field(annotator).hex();
    return unit_hash(key) < 0.5 ? Order::Forward : Order::Swapped;
  }

  std::string order_token(const std::string& task_id, const std::string& annotator,
                          Order order) const {
    return Sha256().field("order").field(opt_.seed).field(task_id).field(annotator)
        .field(judgeharness::to_string(order)).hex().substr(0, 12);
  }

  /// Accepts "Forward"/"Swapped" or the opaque token issued with the assignment.
  Order decode_order(const std::string& task_id, const std::string& annotator,
                     const std::string& value) const {
    if (value == order_token(task_id, annotator, Order::Forward)) return Order::Forward;
    if (value == order_token(task_id, annotator, Order::Swapped)) return Order::Swapped;
    return parse_order(value);
  }

  /// Returns this annotator's outstanding assignment, or a new one on the
  /// open task with the fewest labels (ties by task order).
  Assignment assign_next(const std::string& annotator) {
    if (annotator.empty()) throw Error(Errc::InvalidArgument, "annotator id is empty");
    std::unique_lock lock(mu_);
    if (auto it = outstanding_.find(annotator); it != outstanding_.end())
      return make_assignment(it->second, annotator);
    std::optional<std::size_t> best;
    std::size_t best_load = 0;
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      const auto& id = tasks_[i].task_id;
      if (pruned_.count(id) || touched(id, annotator)) continue;
      const std::size_t load = label_count(id) + pending_count(id);
      if (load >= opt_.labels_per_task) continue;
      if (!best || label_count(id) + pending_count(id) < best_load) {
        best = i;
        best_load = load;
      }
    }
    if (!best) throw Error(Errc::NoTasksRemaining, "no open task for annotator " + annotator);
    const auto& id = tasks_[*best].task_id;
    const Order order = display_order_for(id, annotator);
    append_event(Json{{"event", "assign"}, {"annotator", annotator}, {"task_id", id},
                      {"displayed_order", std::string(judgeharness::to_string(order))},
                      {"ts", opt_.clock()}});
    apply_assign(annotator, id);
    return make_assignment(id, annotator);
  }

  /// Stores a label given as displayed; Swapped displays are flip-mapped.
  /// Identical resubmission is a no-op, a differing one is rejected.
  AnnotationRecord submit_label(const std::string& annotator, const std::string& task_id,
                                Verdict as_displayed, Order displayed) {
    std::unique_lock lock(mu_);
    if (!task_index_.count(task_id)) throw Error(Errc::UnknownTask, task_id);
    const Verdict canonical = to_canonical(as_displayed, displayed);
    if (auto it = labels_.find(task_id); it != labels_.end()) {
      if (auto rec = it->second.find(annotator); rec != it->second.end()) {
        if (rec->second.verdict == canonical && rec->second.displayed_order == displayed)
          return rec->second;
        throw Error(Errc::DuplicateDifferingLabel, annotator + " already labeled " + task_id);
      }
    }
    auto out = outstanding_.find(annotator);
    if (out == outstanding_.end() || out->second != task_id)
      throw Error(Errc::UnknownAssignment, task_id + " is not assigned to " + annotator);
    if (displayed != display_order_for(task_id, annotator))
      throw Error(Errc::InvalidArgument, "displayed_order does not match the assignment");
    AnnotationRecord rec{task_id, annotator, canonical, displayed, as_displayed, opt_.clock()};
    append_event(Json{{"event", "label"},
                      {"annotator", annotator},
                      {"task_id", task_id},
                      {"verdict", std::string(to_token(canonical))},
                      {"verdict_as_displayed", std::string(to_token(as_displayed))},
                      {"displayed_order", std::string(judgeharness::to_string(displayed))},
                      {"ts", rec.timestamp}});
    apply_label(rec);
    return rec;
  }

  /// Manual exclusion; logged so replay reproduces it.
  void prune(const std::string& task_id, const std::string& note) {
    std::unique_lock lock(mu_);
    if (!task_index_.count(task_id)) throw Error(Errc::UnknownTask, task_id);
    if (pruned_.count(task_id)) return;
    append_event(Json{{"event", "prune"}, {"task_id", task_id}, {"note", note}, {"ts", opt_.clock()}});
    pruned_.insert(task_id);
  }

  std::vector<AnnotationRecord> records() const {
    std::shared_lock lock(mu_);
    std::vector<AnnotationRecord> out;
    for (const auto& t : tasks_)
      if (auto it = labels_.find(t.task_id); it != labels_.end())
        for (const auto& [_, r] : it->second) out.push_back(r);
    return out;
  }

  GoldDerivation derive_gold() const {
    std::shared_lock lock(mu_);
    return derive_gold_locked();
  }

  Json progress_stats() const {
    std::shared_lock lock(mu_);
    long labeled = 0, complete = 0, total_labels = 0;
    std::map<std::string, long> per_annotator;
    for (const auto& t : tasks_) {
      auto it = labels_.find(t.task_id);
      const std::size_t n = it == labels_.end() ? 0 : it->second.size();
      labeled += n > 0;
      complete += n >= opt_.labels_per_task;
      total_labels += static_cast<long>(n);
      if (it != labels_.end())
        for (const auto& [a, _] : it->second) ++per_annotator[a];
    }
    const auto gold = derive_gold_locked();
    Json pa = Json::object();
    for (const auto& [a, n] : per_annotator) pa[a] = n;
    return Json{{"tasks_total", tasks_.size()},
                {"tasks_labeled", labeled},
                {"tasks_complete", complete},
                {"labels_total", total_labels},
                {"per_annotator", pa},
                {"iaa", analysis::to_json(gold.iaa)},
                {"iaa_threshold", opt_.iaa_threshold},
                {"gold_distribution", to_json(gold.distribution)}};
  }

  static Json to_json(const GoldDistribution& d) {
    return Json{{"ties", d.ties},       {"win1", d.win1},
                {"win2", d.win2},       {"excluded", d.excluded},
                {"summary", distribution_text(d)}};
  }

  /// One-line summary, e.g. "105 ties, 422 Win1, 472 Win2 (3 excluded)".
  static std::string distribution_text(const GoldDistribution& d) {
    return std::to_string(d.ties) + " ties, " + std::to_string(d.win1) + " Win1, " +
           std::to_string(d.win2) + " Win2 (" + std::to_string(d.excluded) + " excluded)";
  }

 private:
  Assignment make_assignment(const std::string& task_id, const std::string& annotator) const {
    const Order order = display_order_for(task_id, annotator);
    return {tasks_[task_index_.at(task_id)], order, order_token(task_id, annotator, order)};
  }

  bool touched(const std::string& task_id, const std::string& annotator) const {
    if (auto it = labels_.find(task_id); it != labels_.end() && it->second.count(annotator))
      return true;
    auto o = outstanding_.find(annotator);
    return o != outstanding_.end() && o->second == task_id;
  }

  std::size_t label_count(const std::string& task_id) const {
    auto it = labels_.find(task_id);
    return it == labels_.end() ? 0 : it->second.size();
  }

  std::size_t pending_count(const std::string& task_id) const {
    std::size_t n = 0;
    for (const auto& [_, t] : outstanding_) n += t == task_id;
    return n;
  }

  void apply_assign(const std::string& annotator, const std::string& task_id) {
    outstanding_[annotator] = task_id;
  }

  void apply_label(const AnnotationRecord& rec) {
    labels_[rec.task_id].emplace(rec.annotator_id, rec);
    if (auto it = outstanding_.find(rec.annotator_id);
        it != outstanding_.end() && it->second == rec.task_id)
      outstanding_.erase(it);
  }

  void append_event(const Json& event) {
    if (log_path_.empty()) return;
    if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path());
    const std::string line = event.dump() + "\n";
    std::ofstream out(log_path_, std::ios::binary | std::ios::app);
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    if (!out) throw Error(Errc::IoError, "append to " + log_path_.string() + " failed");
  }

  /// A crash can leave a partial final line; it is discarded and cut from the file.
  void replay_log() {
    std::string text = read_file(log_path_);
    if (!text.empty() && text.back() != '\n') {
      const auto last_nl = text.rfind('\n');
      text = last_nl == std::string::npos ? std::string{} : text.substr(0, last_nl + 1);
      write_file_atomic(log_path_, text);
    }
    for (const auto& e : parse_jsonl(text, log_path_.string())) {
      const auto type = e.at("event").get<std::string>();
      const auto task_id = e.at("task_id").get<std::string>();
      if (!task_index_.count(task_id))
        throw Error(Errc::FormatError, "event log references unknown task " + task_id);
      if (type == "assign") {
        apply_assign(e.at("annotator").get<std::string>(), task_id);
      } else if (type == "label") {
        AnnotationRecord r{task_id, e.at("annotator").get<std::string>(),
                           normalize_verdict(e.at("verdict").get<std::string>()),
                           parse_order(e.at("displayed_order").get<std::string>()),
                           normalize_verdict(e.at("verdict_as_displayed").get<std::string>()),
                           e.value("ts", std::string{})};
        apply_label(r);
      } else if (type == "prune") {
        pruned_.insert(task_id);
      } else {
        throw Error(Errc::FormatError, "unknown event type '" + type + "'");
      }
    }
  }

  GoldDerivation derive_gold_locked() const {
    GoldDerivation out;
    std::set<std::string> kept;
    for (const auto& t : tasks_) {
      auto it = labels_.find(t.task_id);
      const std::size_t n = it == labels_.end() ? 0 : it->second.size();
      if (n < opt_.labels_per_task) {
        if (n > 0 || pruned_.count(t.task_id)) out.incomplete.push_back(t.task_id);
        continue;
      }
      std::vector<Verdict> votes;
      for (const auto& [_, r] : it->second) votes.push_back(r.verdict);
      GoldLabel g = vote(t.task_id, votes);
      if (pruned_.count(t.task_id)) {
        g.gold.reset();
        g.exclusion = ExclusionReason::ManualPrune;
      }
      if (g.gold) {
        kept.insert(t.task_id);
        switch (*g.gold) {
          case Verdict::Tie: ++out.distribution.ties; break;
          case Verdict::Win1: ++out.distribution.win1; break;
          case Verdict::Win2: ++out.distribution.win2; break;
        }
      } else {
        ++out.distribution.excluded;
      }
      out.labels.push_back(std::move(g));
    }
    const auto by_annotator = labels_by_annotator();
    out.iaa = analysis::compute_iaa(by_annotator, &kept);
    for (const auto& [annotator, mean] : out.iaa.annotator_mean) {
      if (!mean || *mean >= opt_.iaa_threshold) continue;
      KappaWarning w{annotator, *mean, {}};
      const auto& mine = by_annotator.at(annotator);
      // Joint counts against every other annotator; leaving one task out
      // only decrements the counts that task contributed.
      std::vector<std::pair<const std::map<std::string, Verdict>*, analysis::JointCounts<Verdict>>> others;
      for (const auto& [other, labels] : by_annotator) {
        if (other == annotator) continue;
        analysis::JointCounts<Verdict> joint;
        for (const auto& [task, v] : mine)
          if (kept.count(task))
            if (auto it = labels.find(task); it != labels.end()) ++joint[{v, it->second}];
        others.emplace_back(&labels, std::move(joint));
      }
      for (const auto& [task, v] : mine) {
        if (!kept.count(task)) continue;
        double sum = 0.0;
        long pairs = 0;
        for (auto& [labels, joint] : others) {
          const auto it = labels->find(task);
          if (it != labels->end()) --joint[{v, it->second}];
          long n = 0;
          for (const auto& [_, c] : joint) n += c;
          if (n > 0) {
            sum += analysis::kappa_from_counts(joint);
            ++pairs;
          }
          if (it != labels->end()) ++joint[{v, it->second}];
        }
        if (pairs == 0) continue;
        const double m = sum / static_cast<double>(pairs);
        if (m > *mean) w.suggestions.push_back({task, m, m - *mean});
      }
      std::sort(w.suggestions.begin(), w.suggestions.end(), [](const auto& a, const auto& b) {
        return a.improvement != b.improvement ? a.improvement > b.improvement : a.task_id < b.task_id;
      });
      if (w.suggestions.size() > opt_.max_suggestions) w.suggestions.resize(opt_.max_suggestions);
      out.warnings.push_back(std::move(w));
    }
    return out;
  }

  std::map<std::string, std::map<std::string, Verdict>> labels_by_annotator() const {
    std::map<std::string, std::map<std::string, Verdict>> out;
    for (const auto& [task, per] : labels_)
      for (const auto& [a, r] : per) out[a][task] = r.verdict;
    return out;
  }

  std::vector<ComparisonTask> tasks_;
  std::map<std::string, std::size_t> task_index_;
  std::filesystem::path log_path_;
  StoreOptions opt_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::map<std::string, AnnotationRecord>> labels_;  // task -> annotator -> record
  std::map<std::string, std::string> outstanding_;                        // annotator -> task
  std::set<std::string> pruned_;
};

inline Json to_json(const GoldLabel& g) {
  return Json{{"task_id", g.task_id},
              {"gold", g.gold ? Json(std::string(to_token(*g.gold))) : Json("Excluded")},
              {"votes", {{"1", g.votes[0]}, {"2", g.votes[1]}, {"Tie", g.votes[2]}}},
              {"exclusion_reason", g.exclusion ? Json(std::string(to_string(*g.exclusion))) : Json(nullptr)}};
}

inline Json to_json(const GoldDerivation& d) {
  Json labels = Json::array();
  for (const auto& g : d.labels) labels.push_back(to_json(g));
  Json warnings = Json::array();
  for (const auto& w : d.warnings) {
    Json s = Json::array();
    for (const auto& p : w.suggestions)
      s.push_back({{"task_id", p.task_id}, {"mean_kappa_without", p.mean_kappa_without},
                   {"improvement", p.improvement}});
    warnings.push_back({{"annotator", w.annotator}, {"mean_kappa", w.mean_kappa}, {"suggested_prunes", s}});
  }
  return Json{{"gold", labels},
              {"incomplete", d.incomplete},
              {"distribution", AnnotationStore::to_json(d.distribution)},
              {"iaa", analysis::to_json(d.iaa)},
              {"warnings", warnings}};
}

}  // namespace judgeharness::annotation
