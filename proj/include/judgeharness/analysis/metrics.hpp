#pragma once

#include <array>
#include <string>
#include <vector>

#include "judgeharness/error.hpp"
#include "judgeharness/jsonl.hpp"
#include "judgeharness/verdict.hpp"

namespace judgeharness::analysis {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long support = 0;    // gold count
  long predicted = 0;  // predicted count
};

struct Averages {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Three-class report. confusion[gold][predicted], indexed by verdict_index().
/// Averages run over the classes present in gold or predictions; 0/0 is 0.
struct MetricsReport {
  long total = 0;
  double accuracy = 0.0;
  std::array<std::array<long, 3>, 3> confusion{};
  std::array<ClassMetrics, 3> per_class{};
  std::vector<Verdict> averaged_classes;
  Averages macro;
  Averages weighted;
};

inline MetricsReport classification_metrics(const std::vector<Verdict>& gold,
                                            const std::vector<Verdict>& predicted) {
  if (gold.size() != predicted.size())
    throw Error(Errc::LengthMismatch, std::to_string(gold.size()) + " gold vs " +
                                          std::to_string(predicted.size()) + " predicted");
  if (gold.empty()) throw Error(Errc::EmptyInput, "no labels");
  MetricsReport r;
  r.total = static_cast<long>(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i)
    ++r.confusion[verdict_index(gold[i])][verdict_index(predicted[i])];
  long correct = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    auto& m = r.per_class[c];
    const long tp = r.confusion[c][c];
    correct += tp;
    for (std::size_t k = 0; k < 3; ++k) {
      m.support += r.confusion[c][k];
      m.predicted += r.confusion[k][c];
    }
    m.precision = m.predicted ? static_cast<double>(tp) / static_cast<double>(m.predicted) : 0.0;
    m.recall = m.support ? static_cast<double>(tp) / static_cast<double>(m.support) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
  for (auto v : kAllVerdicts) {
    const auto& m = r.per_class[verdict_index(v)];
    if (m.support == 0 && m.predicted == 0) continue;
    r.averaged_classes.push_back(v);
    const double w = static_cast<double>(m.support) / static_cast<double>(r.total);
    r.macro.precision += m.precision;
    r.macro.recall += m.recall;
    r.macro.f1 += m.f1;
    r.weighted.precision += w * m.precision;
    r.weighted.recall += w * m.recall;
    r.weighted.f1 += w * m.f1;
  }
  const double n = static_cast<double>(r.averaged_classes.size());
  r.macro.precision /= n;
  r.macro.recall /= n;
  r.macro.f1 /= n;
  return r;
}

inline Json to_json(const MetricsReport& r) {
  Json per = Json::object();
  for (auto v : kAllVerdicts) {
    const auto& m = r.per_class[verdict_index(v)];
    per[std::string(to_token(v))] = {{"precision", m.precision}, {"recall", m.recall},
                                     {"f1", m.f1}, {"support", m.support},
                                     {"predicted", m.predicted}};
  }
  Json confusion = Json::array();
  for (const auto& row : r.confusion) confusion.push_back(row);
  std::vector<std::string> averaged;
  for (auto v : r.averaged_classes) averaged.emplace_back(to_token(v));
  return Json{{"total", r.total},
              {"accuracy", r.accuracy},
              {"macro", {{"precision", r.macro.precision}, {"recall", r.macro.recall}, {"f1", r.macro.f1}}},
              {"weighted", {{"precision", r.weighted.precision}, {"recall", r.weighted.recall}, {"f1", r.weighted.f1}}},
              {"per_class", per},
              {"confusion", {{"labels", {"1", "2", "Tie"}}, {"rows_are", "gold"}, {"matrix", confusion}}},
              {"averaged_classes", averaged},
              {"zero_division", 0}};
}

}  // namespace judgeharness::analysis
