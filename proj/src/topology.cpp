#include "asyncnet/topology.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "asyncnet/rng.hpp"

namespace asyncnet {

bool Topology::contains_link(int l, int k) const {
  const auto& nb = neighbors[k];
  return std::binary_search(nb.begin(), nb.end(), l);
}

bool is_connected(const Topology& topo) {
  if (topo.n_agents == 0) return false;
  std::vector<char> seen(topo.n_agents, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int u : topo.neighbors[v]) {
      if (!seen[u]) {
        seen[u] = 1;
        ++count;
        stack.push_back(u);
      }
    }
  }
  return count == topo.n_agents;
}

namespace {

Topology from_adjacency(int n, const std::vector<std::pair<int, int>>& edges) {
  Topology topo;
  topo.n_agents = n;
  topo.neighbors.assign(n, {});
  for (int k = 0; k < n; ++k) topo.neighbors[k].push_back(k);
  for (auto [a, b] : edges) {
    topo.neighbors[a].push_back(b);
    topo.neighbors[b].push_back(a);
  }
  for (auto& nb : topo.neighbors) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  topo.edges = edges;
  std::sort(topo.edges.begin(), topo.edges.end());
  topo.edges.erase(std::unique(topo.edges.begin(), topo.edges.end()),
                   topo.edges.end());
  return topo;
}

void check_n(int n) {
  if (n < 1) throw std::invalid_argument("empty network");
}

}  // namespace

Topology ring_topology(int n) {
  check_n(n);
  std::vector<std::pair<int, int>> edges;
  for (int k = 0; k < n; ++k) {
    const int next = (k + 1) % n;
    if (k != next) edges.emplace_back(std::min(k, next), std::max(k, next));
  }
  return from_adjacency(n, edges);
}

Topology full_topology(int n) {
  check_n(n);
  std::vector<std::pair<int, int>> edges;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) edges.emplace_back(a, b);
  return from_adjacency(n, edges);
}

Topology topology_from_edges(int n, std::vector<std::pair<int, int>> edges) {
  check_n(n);
  for (auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n || b >= n)
      throw std::invalid_argument("edge endpoint out of range");
    if (a == b) throw std::invalid_argument("self-loop edges are implicit");
    if (a > b) std::swap(a, b);
  }
  Topology topo = from_adjacency(n, edges);
  if (!is_connected(topo)) throw std::runtime_error("unconnected topology");
  return topo;
}

Topology random_geometric_topology(int n, double radius, std::uint64_t seed,
                                   int max_retries) {
  check_n(n);
  if (radius <= 0.0) throw std::invalid_argument("radius must be positive");
  Rng rng(seed, 0x746F706FULL);
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    std::vector<double> x(n), y(n);
    for (int k = 0; k < n; ++k) {
      x[k] = rng.uniform01();
      y[k] = rng.uniform01();
    }
    std::vector<std::pair<int, int>> edges;
    const double r2 = radius * radius;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        const double dx = x[a] - x[b];
        const double dy = y[a] - y[b];
        if (dx * dx + dy * dy <= r2) edges.emplace_back(a, b);
      }
    Topology topo = from_adjacency(n, edges);
    if (is_connected(topo)) return topo;
  }
  throw std::runtime_error("unconnected topology");
}

}  // namespace asyncnet
