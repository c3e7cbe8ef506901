#pragma once

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "judgeharness/analysis/graph.hpp"
#include "judgeharness/analysis/kappa.hpp"
#include "judgeharness/analysis/metrics.hpp"
#include "judgeharness/analysis/tally.hpp"

namespace judgeharness::analysis {

namespace detail {

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

inline std::string render_grid(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (widths.size() <= c) widths.push_back(0);
      widths[c] = std::max(widths[c], r[c].size());
    }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c)
      line += (c ? "  " : "") + (c + 1 == r.size() ? r[c] : pad(r[c], widths[c]));
    out += line + "\n";
  }
  return out;
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + "\"";
}

}  // namespace detail

/// Square grid of (win,lose,tie) tuples, row system against column system.
inline std::string tally_grid_text(const TallyTable& t) {
  const auto& sys = t.systems();
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"Base Model"};
  head.insert(head.end(), sys.begin(), sys.end());
  rows.push_back(head);
  for (const auto& a : sys) {
    std::vector<std::string> row{a};
    for (const auto& b : sys) {
      if (a == b || !t.contains(a, b)) {
        row.push_back("/");
        continue;
      }
      const auto p = t.get(a, b);
      row.push_back("(" + std::to_string(p.wins) + "," + std::to_string(p.losses) + "," +
                    std::to_string(p.ties) + ")");
    }
    rows.push_back(row);
  }
  return detail::render_grid(rows);
}

inline std::string tally_tsv(const TallyTable& t) {
  std::string out = "system_a\tsystem_b\twins\tlosses\tties\n";
  for (const auto& p : t.pairs())
    out += p.system_a + "\t" + p.system_b + "\t" + std::to_string(p.wins) + "\t" +
           std::to_string(p.losses) + "\t" + std::to_string(p.ties) + "\n";
  return out;
}

/// Graphviz description: one statement per directed edge (labelled with its
/// weight), dashed undirected statements for similar pairs.
inline std::string graph_dot(const SuperiorityGraph& g) {
  std::string out = "digraph superiority {\n";
  for (const auto& n : g.nodes) {
    const bool connected =
        std::any_of(g.directed.begin(), g.directed.end(),
                    [&](const auto& e) { return e.winner == n || e.loser == n; }) ||
        std::any_of(g.similar.begin(), g.similar.end(),
                    [&](const auto& e) { return e.a == n || e.b == n; });
    if (!connected) out += "  " + detail::quote(n) + ";\n";
  }
  for (const auto& e : g.directed)
    out += "  " + detail::quote(e.winner) + " -> " + detail::quote(e.loser) + " [label=\"" +
           std::to_string(e.weight) + "\"];\n";
  for (const auto& e : g.similar)
    out += "  " + detail::quote(e.a) + " -> " + detail::quote(e.b) +
           " [style=dashed, dir=none];\n";
  return out + "}\n";
}

inline Json to_json(const SuperiorityGraph& g) {
  Json d = Json::array(), s = Json::array();
  for (const auto& e : g.directed) d.push_back({{"winner", e.winner}, {"loser", e.loser}, {"weight", e.weight}});
  for (const auto& e : g.similar) s.push_back({{"a", e.a}, {"b", e.b}, {"margin", e.margin}});
  return Json{{"nodes", g.nodes}, {"threshold", g.threshold}, {"directed_edges", d},
              {"similar_edges", s}, {"acyclic", g.acyclic}, {"cycles", g.cycles}};
}

inline std::string graph_edges_tsv(const SuperiorityGraph& g) {
  std::string out = "kind\tfrom\tto\tweight\n";
  for (const auto& e : g.directed)
    out += "directed\t" + e.winner + "\t" + e.loser + "\t" + std::to_string(e.weight) + "\n";
  for (const auto& e : g.similar)
    out += "similar\t" + e.a + "\t" + e.b + "\t" + std::to_string(e.margin) + "\n";
  return out;
}

inline Json to_json(const Ranking& r) {
  Json scores = Json::array();
  for (const auto& s : r.order)
    scores.push_back({{"system", s}, {"copeland", r.copeland.at(s)}, {"net_margin", r.net_margin.at(s)}});
  return Json{{"method", r.method}, {"order", r.order}, {"scores", scores}, {"cycles", r.cycles}};
}

inline std::string ranking_text(const Ranking& r) {
  std::vector<std::vector<std::string>> rows{{"rank", "system", "copeland", "net_margin"}};
  for (std::size_t i = 0; i < r.order.size(); ++i)
    rows.push_back({std::to_string(i + 1), r.order[i], std::to_string(r.copeland.at(r.order[i])),
                    std::to_string(r.net_margin.at(r.order[i]))});
  std::string out = "method: " + r.method + "\n" + detail::render_grid(rows);
  for (const auto& c : r.cycles) {
    out += "cycle:";
    for (const auto& n : c) out += " " + n;
    out += "\n";
  }
  return out;
}

inline std::string metrics_text(const MetricsReport& r) {
  using detail::fixed4;
  std::vector<std::vector<std::string>> rows{{"", "Accuracy", "Precision", "Recall", "F1"}};
  rows.push_back({"macro", fixed4(r.accuracy), fixed4(r.macro.precision), fixed4(r.macro.recall),
                  fixed4(r.macro.f1)});
  rows.push_back({"weighted", fixed4(r.accuracy), fixed4(r.weighted.precision),
                  fixed4(r.weighted.recall), fixed4(r.weighted.f1)});
  std::string out = detail::render_grid(rows) + "\n";
  std::vector<std::vector<std::string>> per{{"class", "precision", "recall", "f1", "support"}};
  for (auto v : kAllVerdicts) {
    const auto& m = r.per_class[verdict_index(v)];
    per.push_back({std::string(to_token(v)), fixed4(m.precision), fixed4(m.recall), fixed4(m.f1),
                   std::to_string(m.support)});
  }
  out += detail::render_grid(per) + "\n";
  std::vector<std::vector<std::string>> conf{{"gold\\pred", "1", "2", "Tie"}};
  for (auto g : kAllVerdicts) {
    std::vector<std::string> row{std::string(to_token(g))};
    for (auto p : kAllVerdicts) row.push_back(std::to_string(r.confusion[verdict_index(g)][verdict_index(p)]));
    conf.push_back(row);
  }
  out += detail::render_grid(conf);
  out += "n=" + std::to_string(r.total) + ", 0/0 treated as 0\n";
  return out;
}

inline std::string metrics_tsv(const MetricsReport& r) {
  std::string out = "class\tprecision\trecall\tf1\tsupport\n";
  for (auto v : kAllVerdicts) {
    const auto& m = r.per_class[verdict_index(v)];
    out += std::string(to_token(v)) + "\t" + detail::fixed4(m.precision) + "\t" +
           detail::fixed4(m.recall) + "\t" + detail::fixed4(m.f1) + "\t" +
           std::to_string(m.support) + "\n";
  }
  out += "macro\t" + detail::fixed4(r.macro.precision) + "\t" + detail::fixed4(r.macro.recall) +
         "\t" + detail::fixed4(r.macro.f1) + "\t" + std::to_string(r.total) + "\n";
  out += "weighted\t" + detail::fixed4(r.weighted.precision) + "\t" +
         detail::fixed4(r.weighted.recall) + "\t" + detail::fixed4(r.weighted.f1) + "\t" +
         std::to_string(r.total) + "\n";
  return out;
}

inline std::string iaa_text(const IaaReport& r, double threshold = 0.85) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{""};
  head.insert(head.end(), r.annotators.begin(), r.annotators.end());
  head.push_back("mean");
  rows.push_back(head);
  for (std::size_t i = 0; i < r.annotators.size(); ++i) {
    std::vector<std::string> row{r.annotators[i]};
    for (const auto& v : r.matrix[i]) row.push_back(v ? detail::fixed4(*v) : "-");
    const auto& m = r.annotator_mean.at(r.annotators[i]);
    row.push_back(m ? detail::fixed4(*m) + (*m < threshold ? " *" : "") : "-");
    rows.push_back(row);
  }
  std::string out = detail::render_grid(rows);
  out += "overall mean: " + (r.overall_mean ? detail::fixed4(*r.overall_mean) : std::string("-")) + "\n";
  return out;
}

}  // namespace judgeharness::analysis
