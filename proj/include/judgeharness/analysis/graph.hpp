#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "judgeharness/analysis/tally.hpp"

namespace judgeharness::analysis {

struct DirectedEdge {
  std::string winner;
  std::string loser;
  long weight = 0;  // wins - losses from the winner's side

  bool operator==(const DirectedEdge&) const = default;
};

struct SimilarEdge {
  std::string a;
  std::string b;
  long margin = 0;  // wins - losses from a's side, |margin| < threshold

  bool operator==(const SimilarEdge&) const = default;
};

/// Directed edge A -> B when A's net margin over B reaches the threshold,
/// otherwise a similar (undirected) edge.
struct SuperiorityGraph {
  std::vector<std::string> nodes;
  std::vector<DirectedEdge> directed;
  std::vector<SimilarEdge> similar;
  long threshold = 5;
  bool acyclic = true;
  std::vector<std::vector<std::string>> cycles;  // strongly connected components of size > 1
  TallyTable tallies;
};

namespace detail {

/// Tarjan's SCC over the directed edges.
inline std::vector<std::vector<std::string>> nontrivial_components(
    const std::vector<std::string>& nodes, const std::vector<DirectedEdge>& edges) {
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& e : edges) adj[e.winner].push_back(e.loser);
  std::map<std::string, int> index, low;
  std::map<std::string, bool> on_stack;
  std::vector<std::string> stack;
  std::vector<std::vector<std::string>> out;
  int counter = 0;
  std::function<void(const std::string&)> visit = [&](const std::string& v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (const auto& w : adj[v]) {
      if (!index.count(w)) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<std::string> comp;
      std::string w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp.push_back(w);
      } while (w != v);
      if (comp.size() > 1) {
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
      }
    }
  };
  for (const auto& n : nodes)
    if (!index.count(n)) visit(n);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

inline SuperiorityGraph build_superiority_graph(const TallyTable& tallies, long threshold = 5) {
  if (threshold < 1) throw Error(Errc::InvalidArgument, "threshold must be >= 1");
  SuperiorityGraph g;
  g.threshold = threshold;
  g.tallies = tallies;
  g.nodes = tallies.systems();
  for (const auto& t : tallies.pairs()) {
    if (t.total() == 0) continue;
    const long d = t.margin();
    if (d >= threshold) g.directed.push_back({t.system_a, t.system_b, d});
    else if (-d >= threshold) g.directed.push_back({t.system_b, t.system_a, -d});
    else g.similar.push_back({t.system_a, t.system_b, d});
  }
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) pos[g.nodes[i]] = i;
  std::sort(g.directed.begin(), g.directed.end(), [&](const auto& x, const auto& y) {
    return std::pair(pos[x.winner], pos[x.loser]) < std::pair(pos[y.winner], pos[y.loser]);
  });
  std::sort(g.similar.begin(), g.similar.end(), [&](const auto& x, const auto& y) {
    return std::pair(pos[x.a], pos[x.b]) < std::pair(pos[y.a], pos[y.b]);
  });
  g.cycles = detail::nontrivial_components(g.nodes, g.directed);
  g.acyclic = g.cycles.empty();
  return g;
}

struct Ranking {
  std::vector<std::string> order;  // strongest first
  std::string method;              // "topological" or "copeland-fallback"
  std::map<std::string, long> copeland;
  std::map<std::string, long> net_margin;
  std::vector<std::vector<std::string>> cycles;
};

/// Copeland score: sum over judged opponents of sign(wins - losses).
inline std::map<std::string, long> copeland_scores(const TallyTable& t) {
  std::map<std::string, long> out;
  for (const auto& s : t.systems()) out[s] = 0;
  for (const auto& p : t.pairs()) {
    if (p.total() == 0) continue;
    const long s = (p.margin() > 0) - (p.margin() < 0);
    out[p.system_a] += s;
    out[p.system_b] -= s;
  }
  return out;
}

inline std::map<std::string, long> net_margins(const TallyTable& t) {
  std::map<std::string, long> out;
  for (const auto& s : t.systems()) out[s] = 0;
  for (const auto& p : t.pairs()) {
    out[p.system_a] += p.margin();
    out[p.system_b] -= p.margin();
  }
  return out;
}

/// Topological order of the directed edges with incomparable nodes ordered by
/// Copeland score, then net margin, then id. Cyclic graphs fall back to the
/// pure Copeland order.
inline Ranking rank_systems(const SuperiorityGraph& g) {
  Ranking r;
  r.copeland = copeland_scores(g.tallies);
  r.net_margin = net_margins(g.tallies);
  r.cycles = g.cycles;
  for (const auto& n : g.nodes) {
    r.copeland.try_emplace(n, 0);
    r.net_margin.try_emplace(n, 0);
  }
  auto stronger = [&](const std::string& a, const std::string& b) {
    if (r.copeland[a] != r.copeland[b]) return r.copeland[a] > r.copeland[b];
    if (r.net_margin[a] != r.net_margin[b]) return r.net_margin[a] > r.net_margin[b];
    return a < b;
  };
  if (!g.acyclic) {
    r.method = "copeland-fallback";
    r.order = g.nodes;
    std::sort(r.order.begin(), r.order.end(), stronger);
    return r;
  }
  r.method = "topological";
  std::map<std::string, int> indegree;
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& n : g.nodes) indegree[n] = 0;
  for (const auto& e : g.directed) {
    adj[e.winner].push_back(e.loser);
    ++indegree[e.loser];
  }
  std::vector<std::string> ready;
  for (const auto& [n, d] : indegree)
    if (d == 0) ready.push_back(n);
  while (!ready.empty()) {
    auto best = std::min_element(ready.begin(), ready.end(), stronger);
    const std::string n = *best;
    ready.erase(best);
    r.order.push_back(n);
    for (const auto& m : adj[n])
      if (--indegree[m] == 0) ready.push_back(m);
  }
  return r;
}

}  // namespace judgeharness::analysis
