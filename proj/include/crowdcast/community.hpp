#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <queue>
#include <set>
#include <stack>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdcast/trace.hpp"

namespace crowdcast {

inline constexpr Seconds kDefaultEdgeThreshold = 1000;
inline constexpr int kDefaultCliqueK = 3;

// Static contact graph: an edge joins pairs whose total contact duration
// reaches the threshold.
struct AggregateGraph {
  std::vector<NodeId> nodes;  // sorted
  std::map<NodeId, std::set<NodeId>> adj;

  bool has_edge(const NodeId& a, const NodeId& b) const {
    auto it = adj.find(a);
    return it != adj.end() && it->second.count(b) > 0;
  }
};

inline AggregateGraph build_aggregate_graph(const Trace& trace,
                                            Seconds edge_threshold = kDefaultEdgeThreshold) {
  std::map<NodePair, Seconds> total;
  for (const auto& ev : trace.events) total[ev.pair()] += ev.end - ev.start;

  AggregateGraph g;
  g.nodes = trace.nodes;
  for (const auto& n : g.nodes) g.adj[n];
  for (const auto& [pair, dur] : total) {
    if (dur < edge_threshold) continue;
    g.adj[pair.first].insert(pair.second);
    g.adj[pair.second].insert(pair.first);
  }
  return g;
}

namespace detail {

// All cliques of exactly k nodes, as sorted index vectors. DFS extension
// restricted to higher-indexed common neighbors keeps each clique unique.
inline void extend_cliques(const std::vector<std::vector<std::size_t>>& adj,
                           std::vector<std::size_t>& current,
                           const std::vector<std::size_t>& candidates, std::size_t k,
                           std::vector<std::vector<std::size_t>>& out) {
  if (current.size() == k) {
    out.push_back(current);
    return;
  }
  for (std::size_t idx = 0; idx < candidates.size(); ++idx) {
    const std::size_t v = candidates[idx];
    std::vector<std::size_t> next;
    for (std::size_t w : adj[v])
      if (w > v && std::binary_search(candidates.begin() + idx + 1, candidates.end(), w))
        next.push_back(w);
    current.push_back(v);
    extend_cliques(adj, current, next, k, out);
    current.pop_back();
  }
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace detail

// Clique percolation: communities are connected components of the k-clique
// adjacency where cliques sharing k-1 nodes connect. Overlapping membership
// is possible; output is sorted for determinism.
inline std::vector<std::set<NodeId>> kclique_communities(const AggregateGraph& g, int k) {
  if (k < 2) throw std::runtime_error("kclique_communities: k must be >= 2");

  std::map<NodeId, std::size_t> index;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) index[g.nodes[i]] = i;
  std::vector<std::vector<std::size_t>> adj(g.nodes.size());
  for (const auto& [n, peers] : g.adj) {
    auto& row = adj[index.at(n)];
    for (const auto& p : peers) row.push_back(index.at(p));
    std::sort(row.begin(), row.end());
  }

  std::vector<std::vector<std::size_t>> cliques;
  std::vector<std::size_t> all(g.nodes.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<std::size_t> current;
  detail::extend_cliques(adj, current, all, static_cast<std::size_t>(k), cliques);
  if (cliques.empty()) return {};

  // cliques sharing any (k-1)-subset are adjacent; bucket by subset
  detail::UnionFind uf(cliques.size());
  std::map<std::vector<std::size_t>, std::size_t> bucket;
  for (std::size_t c = 0; c < cliques.size(); ++c) {
    for (std::size_t drop = 0; drop < cliques[c].size(); ++drop) {
      std::vector<std::size_t> key;
      key.reserve(cliques[c].size() - 1);
      for (std::size_t m = 0; m < cliques[c].size(); ++m)
        if (m != drop) key.push_back(cliques[c][m]);
      auto [it, inserted] = bucket.try_emplace(std::move(key), c);
      if (!inserted) uf.unite(it->second, c);
    }
  }

  std::map<std::size_t, std::set<NodeId>> merged;
  for (std::size_t c = 0; c < cliques.size(); ++c)
    for (std::size_t v : cliques[c]) merged[uf.find(c)].insert(g.nodes[v]);

  std::vector<std::set<NodeId>> out;
  out.reserve(merged.size());
  for (auto& [root, members] : merged) out.push_back(std::move(members));
  std::sort(out.begin(), out.end());
  return out;
}

// Unweighted shortest-path betweenness (Brandes), undirected convention
// (each pair's dependency split in half). Restricting to `within` computes
// centrality on the induced subgraph.
inline std::map<NodeId, double> betweenness_centrality(const AggregateGraph& g,
                                                       const std::set<NodeId>* within = nullptr) {
  std::vector<NodeId> nodes;
  for (const auto& n : g.nodes)
    if (!within || within->count(n)) nodes.push_back(n);

  std::map<NodeId, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) index[nodes[i]] = i;
  std::vector<std::vector<std::size_t>> adj(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto it = g.adj.find(nodes[i]);
    if (it == g.adj.end()) continue;
    for (const auto& p : it->second) {
      auto pit = index.find(p);
      if (pit != index.end()) adj[i].push_back(pit->second);
    }
  }

  std::vector<double> bc(nodes.size(), 0.0);
  for (std::size_t s = 0; s < nodes.size(); ++s) {
    std::vector<std::vector<std::size_t>> pred(nodes.size());
    std::vector<double> sigma(nodes.size(), 0.0);
    std::vector<long> dist(nodes.size(), -1);
    sigma[s] = 1.0;
    dist[s] = 0;
    std::vector<std::size_t> order;
    std::queue<std::size_t> q;
    q.push(s);
    while (!q.empty()) {
      const std::size_t v = q.front();
      q.pop();
      order.push_back(v);
      for (std::size_t w : adj[v]) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          q.push(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          pred[w].push_back(v);
        }
      }
    }
    std::vector<double> delta(nodes.size(), 0.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const std::size_t w = *it;
      for (std::size_t v : pred[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      if (w != s) bc[w] += delta[w];
    }
  }

  std::map<NodeId, double> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) out[nodes[i]] = bc[i] / 2.0;
  return out;
}

inline std::map<NodeId, double> degree_centrality(const AggregateGraph& g) {
  std::map<NodeId, double> out;
  for (const auto& n : g.nodes) {
    auto it = g.adj.find(n);
    out[n] = it == g.adj.end() ? 0.0 : static_cast<double>(it->second.size());
  }
  return out;
}

struct CentralityReport {
  std::map<NodeId, double> betweenness;
  std::map<NodeId, double> degree;
};

inline CentralityReport node_centrality(const AggregateGraph& g) {
  return CentralityReport{betweenness_centrality(g), degree_centrality(g)};
}

// Everything Bubble Rap consults at contact time.
struct BubbleRapState {
  std::vector<std::set<NodeId>> communities;
  std::map<NodeId, double> global_centrality;
  std::vector<std::map<NodeId, double>> local_centrality;  // per community

  bool shares_community(const NodeId& n, const NodeId& d) const {
    for (const auto& c : communities)
      if (c.count(n) && c.count(d)) return true;
    return false;
  }

  double global_of(const NodeId& n) const {
    auto it = global_centrality.find(n);
    return it == global_centrality.end() ? 0.0 : it->second;
  }

  // Highest local centrality over communities shared with the destination.
  double local_of(const NodeId& n, const NodeId& d) const {
    double best = 0.0;
    for (std::size_t c = 0; c < communities.size(); ++c) {
      if (!communities[c].count(n) || !communities[c].count(d)) continue;
      auto it = local_centrality[c].find(n);
      if (it != local_centrality[c].end()) best = std::max(best, it->second);
    }
    return best;
  }
};

inline BubbleRapState build_bubblerap_state(const Trace& trace,
                                            Seconds edge_threshold = kDefaultEdgeThreshold,
                                            int k = kDefaultCliqueK) {
  const AggregateGraph g = build_aggregate_graph(trace, edge_threshold);
  BubbleRapState state;
  state.communities = kclique_communities(g, k);
  state.global_centrality = betweenness_centrality(g);
  state.local_centrality.reserve(state.communities.size());
  for (const auto& c : state.communities)
    state.local_centrality.push_back(betweenness_centrality(g, &c));
  return state;
}

}  // namespace crowdcast
