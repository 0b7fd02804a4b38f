#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "gamedp/graph.hpp"
#include "gamedp/threads.hpp"

namespace gamedp {

// Payoff kernel of the stopping game. Both give the same value; they
// differ in who wins simultaneous action before the horizon.
//   H: buyer priority on ties (pays the lower payoff),
//   J: seller priority on ties before T (pays the upper payoff),
//      terminal always pays the lower payoff.
enum class Kernel { H, J };

struct DPResult {
  std::vector<double> value;                 // J per node
  std::vector<std::uint8_t> buyer_stop;      // J == psi attained
  std::vector<std::uint8_t> seller_cancel;   // J == phi attained
  std::uint32_t root = 0;
  double root_value = 0.0;
};

// Backward induction for the Dynkin game on a filtered lattice:
//   terminal:  J = psi
//   interior:  J = min(phi, max(psi, E[J over children]))
// Children are summed in stored order with compensated accumulation;
// layers may be processed in parallel internally, with identical output
// for any worker count.
inline DPResult solve(const FilteredLattice& lat) {
  validate(lat);
  const auto layers = layers_of(lat);
  DPResult res;
  res.root = lat.root;
  res.value.assign(lat.size(), 0.0);
  res.buyer_stop.assign(lat.size(), 0);
  res.seller_cancel.assign(lat.size(), 0);

  for (int k = lat.n_steps; k >= 0; --k) {
    const auto& layer = layers[k];
    auto process = [&](std::size_t, std::size_t begin, std::size_t end) {
      for (std::size_t idx = begin; idx < end; ++idx) {
        const std::uint32_t id = layer[idx];
        const double psi = lat.lower[id], phi = lat.upper[id];
        double value;
        if (k == lat.n_steps) {
          value = psi;
        } else {
          KahanSum expectation;
          const auto kids = lat.children(id);
          const auto ps = lat.probs(id);
          for (std::size_t e = 0; e < kids.size(); ++e)
            expectation.add(ps[e] * res.value[kids[e]]);
          value = std::min(phi, std::max(psi, expectation.value()));
        }
        res.value[id] = value;
        res.buyer_stop[id] = value == psi;
        res.seller_cancel[id] = value == phi;
      }
    };
    if (layer.size() >= 16384)
      parallel_blocks(layer.size(), 8192, process);
    else
      process(0, 0, layer.size());
  }
  res.root_value = res.value[lat.root];
  return res;
}

// Root game value V = J(root).
inline double value(const FilteredLattice& lat) { return solve(lat).root_value; }

// Per-node stop flags; adapted by construction. Every rule stops at
// terminal nodes, so every path stops.
struct StoppingRule {
  std::vector<std::uint8_t> stop;
};

struct StrategyPair {
  StoppingRule seller;  // sigma*: first node with the cancel flag
  StoppingRule buyer;   // tau*:   first node with the stop flag
};

// Optimal regions from the DP flags: tau* stops where the lower bound
// is attained, sigma* cancels where the upper bound is. Tie nodes
// (psi == phi) keep both stops; each kernel's own priority then decides
// who takes the tie (buyer under H, seller under J), and the payoff is
// identical either way. Both rules stop at terminals.
inline StrategyPair extract_strategies(const DPResult& res,
                                       const FilteredLattice& lat) {
  StrategyPair out;
  out.seller.stop.assign(lat.size(), 0);
  out.buyer.stop.assign(lat.size(), 0);
  for (std::uint32_t id = 0; id < lat.size(); ++id) {
    if (lat.is_terminal(id)) {
      out.buyer.stop[id] = 1;
      out.seller.stop[id] = 1;
      continue;
    }
    out.buyer.stop[id] = res.buyer_stop[id];
    out.seller.stop[id] = res.seller_cancel[id];
  }
  return out;
}

}  // namespace gamedp
