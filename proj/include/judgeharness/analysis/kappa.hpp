#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "judgeharness/error.hpp"
#include "judgeharness/jsonl.hpp"

namespace judgeharness::analysis {

/// Joint label counts for two raters over their shared items.
template <typename Label>
using JointCounts = std::map<std::pair<Label, Label>, long>;

/// Cohen's kappa: (p_o - p_e) / (1 - p_e), p_e from the product of the two
/// raters' marginals. Perfect observed agreement is 1 even when p_e = 1.
template <typename Label>
double kappa_from_counts(const JointCounts<Label>& joint) {
  std::map<Label, long> ca, cb;
  long total = 0, agree = 0;
  for (const auto& [labels, count] : joint) {
    if (count == 0) continue;
    ca[labels.first] += count;
    cb[labels.second] += count;
    total += count;
    if (labels.first == labels.second) agree += count;
  }
  if (total == 0) throw Error(Errc::EmptyInput, "no labels");
  if (agree == total) return 1.0;
  const double n = static_cast<double>(total);
  const double po = static_cast<double>(agree) / n;
  double pe = 0.0;
  for (const auto& [label, count] : ca)
    if (auto it = cb.find(label); it != cb.end())
      pe += (static_cast<double>(count) / n) * (static_cast<double>(it->second) / n);
  return (po - pe) / (1.0 - pe);
}

template <typename Label>
double cohens_kappa(const std::vector<Label>& a, const std::vector<Label>& b) {
  if (a.size() != b.size())
    throw Error(Errc::LengthMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  if (a.empty()) throw Error(Errc::EmptyInput, "no labels");
  JointCounts<Label> joint;
  for (std::size_t i = 0; i < a.size(); ++i) ++joint[{a[i], b[i]}];
  return kappa_from_counts(joint);
}

/// Pairwise kappa over annotators; a pair's kappa uses the tasks both labeled.
struct IaaReport {
  std::vector<std::string> annotators;
  std::vector<std::vector<std::optional<double>>> matrix;  // diagonal 1, nullopt: no overlap
  std::map<std::string, std::optional<double>> annotator_mean;
  std::optional<double> overall_mean;
};

template <typename Label>
IaaReport compute_iaa(const std::map<std::string, std::map<std::string, Label>>& labels_by_annotator,
                      const std::set<std::string>* task_filter = nullptr) {
  IaaReport r;
  for (const auto& [a, _] : labels_by_annotator) r.annotators.push_back(a);
  const std::size_t n = r.annotators.size();
  r.matrix.assign(n, std::vector<std::optional<double>>(n));
  double total = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    r.matrix[i][i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& la = labels_by_annotator.at(r.annotators[i]);
      const auto& lb = labels_by_annotator.at(r.annotators[j]);
      std::vector<Label> va, vb;
      for (const auto& [task, label] : la) {
        if (task_filter && !task_filter->count(task)) continue;
        if (auto it = lb.find(task); it != lb.end()) {
          va.push_back(label);
          vb.push_back(it->second);
        }
      }
      if (va.empty()) continue;
      const double k = cohens_kappa(va, vb);
      r.matrix[i][j] = r.matrix[j][i] = k;
      total += k;
      ++pairs;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    long c = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && r.matrix[i][j]) {
        s += *r.matrix[i][j];
        ++c;
      }
    r.annotator_mean[r.annotators[i]] = c ? std::optional<double>(s / static_cast<double>(c)) : std::nullopt;
  }
  if (pairs) r.overall_mean = total / static_cast<double>(pairs);
  return r;
}

inline Json to_json(const IaaReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  Json m = Json::array();
  for (const auto& row : r.matrix) {
    Json jr = Json::array();
    for (const auto& v : row) jr.push_back(opt(v));
    m.push_back(jr);
  }
  Json means = Json::object();
  for (const auto& [a, v] : r.annotator_mean) means[a] = opt(v);
  return Json{{"annotators", r.annotators}, {"kappa", m}, {"annotator_mean", means},
              {"overall_mean", opt(r.overall_mean)}};
}

}  // namespace judgeharness::analysis
