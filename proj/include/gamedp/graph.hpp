#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gamedp/errors.hpp"

namespace gamedp {

// Finite filtered state graph: a DAG layered by time index, with one
// lower/upper payoff pair per node and positive transition
// probabilities summing to 1 per node. Terminal nodes sit at layer
// n_steps and have no transitions. Stored flat so multi-million-node
// lattices stay cheap.
struct FilteredLattice {
  int n_steps = 0;
  std::uint32_t root = 0;
  std::vector<std::int32_t> time_index;
  std::vector<double> lower;                // psi
  std::vector<double> upper;                // phi
  std::vector<std::uint64_t> edge_begin;    // size()+1 offsets into edges
  std::vector<std::uint32_t> edge_child;
  std::vector<double> edge_prob;

  std::size_t size() const { return time_index.size(); }
  std::size_t edge_count() const { return edge_child.size(); }
  bool is_terminal(std::uint32_t id) const { return time_index[id] == n_steps; }

  std::span<const std::uint32_t> children(std::uint32_t id) const {
    return {edge_child.data() + edge_begin[id],
            edge_child.data() + edge_begin[id + 1]};
  }
  std::span<const double> probs(std::uint32_t id) const {
    return {edge_prob.data() + edge_begin[id],
            edge_prob.data() + edge_begin[id + 1]};
  }
};

namespace detail {
[[noreturn]] inline void malformed(std::uint32_t id, const std::string& what) {
  throw MalformedLattice("node " + std::to_string(id) + ": " + what);
}
}  // namespace detail

inline void validate(const FilteredLattice& lat) {
  const std::size_t n_nodes = lat.size();
  if (n_nodes == 0) throw MalformedLattice("lattice has no nodes");
  if (lat.lower.size() != n_nodes || lat.upper.size() != n_nodes ||
      lat.edge_begin.size() != n_nodes + 1)
    throw MalformedLattice("inconsistent array sizes");
  if (lat.root >= n_nodes)
    throw MalformedLattice("root id " + std::to_string(lat.root) + " out of range");
  if (lat.time_index[lat.root] != 0)
    detail::malformed(lat.root, "root must be at time index 0");
  for (std::uint32_t id = 0; id < n_nodes; ++id) {
    const int k = lat.time_index[id];
    if (k < 0 || k > lat.n_steps)
      detail::malformed(id, "time index " + std::to_string(k) + " outside [0, n]");
    const double psi = lat.lower[id], phi = lat.upper[id];
    if (!std::isfinite(psi) || !std::isfinite(phi) || psi < 0.0)
      detail::malformed(id, "payoffs must be finite and nonnegative");
    if (psi > phi) detail::malformed(id, "lower payoff exceeds upper payoff");
    if (lat.edge_begin[id + 1] < lat.edge_begin[id])
      detail::malformed(id, "edge offsets not monotone");
    const auto kids = lat.children(id);
    const auto ps = lat.probs(id);
    if (k == lat.n_steps) {
      if (!kids.empty()) detail::malformed(id, "terminal node has transitions");
      continue;
    }
    if (kids.empty()) detail::malformed(id, "non-terminal node has no transitions");
    double total = 0.0;
    for (std::size_t e = 0; e < kids.size(); ++e) {
      if (kids[e] >= n_nodes) detail::malformed(id, "transition to unknown node");
      if (lat.time_index[kids[e]] != k + 1)
        detail::malformed(id, "child not in the next time layer");
      if (!(ps[e] > 0.0) || !std::isfinite(ps[e]))
        detail::malformed(id, "transition probability must be > 0");
      total += ps[e];
    }
    if (std::abs(total - 1.0) > 1e-12)
      detail::malformed(id, "transition probabilities sum to " + std::to_string(total));
  }
}

// Node ids grouped by time layer (counting sort; ids ascending within
// each layer). Used by the solver and the enumeration oracle.
inline std::vector<std::vector<std::uint32_t>> layers_of(const FilteredLattice& lat) {
  std::vector<std::vector<std::uint32_t>> layers(lat.n_steps + 1);
  std::vector<std::size_t> counts(lat.n_steps + 1, 0);
  for (std::size_t id = 0; id < lat.size(); ++id) ++counts[lat.time_index[id]];
  for (int k = 0; k <= lat.n_steps; ++k) layers[k].reserve(counts[k]);
  for (std::uint32_t id = 0; id < lat.size(); ++id)
    layers[lat.time_index[id]].push_back(id);
  return layers;
}

}  // namespace gamedp
