#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace asyncnet {

// Undirected connected agent graph with self-inclusive neighborhoods:
// every agent belongs to its own neighborhood, and l in N_k iff k in N_l.
struct Topology {
  int n_agents = 0;
  std::vector<std::vector<int>> neighbors;  // sorted, always contains self
  std::vector<std::pair<int, int>> edges;   // undirected, first < second

  int degree(int k) const { return static_cast<int>(neighbors[k].size()); }
  bool contains_link(int l, int k) const;
};

bool is_connected(const Topology& topo);

// Throws std::invalid_argument("empty network") for n < 1. The edge-list
// and random-geometric builders throw std::runtime_error("unconnected
// topology") when the result is not connected (the geometric builder
// retries with fresh placements before giving up).
Topology ring_topology(int n);
Topology full_topology(int n);
Topology topology_from_edges(int n, std::vector<std::pair<int, int>> edges);
Topology random_geometric_topology(int n, double radius, std::uint64_t seed,
                                   int max_retries = 200);

}  // namespace asyncnet
