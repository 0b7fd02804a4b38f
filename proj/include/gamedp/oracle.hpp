#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gamedp/errors.hpp"
#include "gamedp/graph.hpp"
#include "gamedp/model.hpp"
#include "gamedp/rng.hpp"
#include "gamedp/solver.hpp"
#include "gamedp/threads.hpp"

namespace gamedp {

struct McConfig {
  std::int64_t n_paths = 100000;
  std::uint64_t seed = 0;
  bool antithetic = false;
};

inline void validate(const McConfig& cfg) {
  if (cfg.n_paths < 100) throw ConfigError("mc.n_paths must be >= 100");
  if (cfg.antithetic && cfg.n_paths % 2 != 0)
    throw ConfigError("mc.n_paths must be even when mc.antithetic is set");
}

namespace detail {

// Payoff when the game stops at a node. Terminal nodes pay the lower
// payoff under both kernels (every rule stops there). Before the
// horizon, H gives ties to the buyer, J to the seller.
inline double stop_payoff(bool seller_stops, bool buyer_stops, bool terminal,
                          double psi, double phi, Kernel kernel) {
  if (terminal) return psi;
  if (seller_stops && buyer_stops) return kernel == Kernel::H ? psi : phi;
  return seller_stops ? phi : psi;
}

}  // namespace detail

struct GameValuePair {
  double infsup = 0.0;
  double supinf = 0.0;
};

// Exhaustive evaluation of E[kernel(sigma, tau)] over every pair of
// pure stopping rules, reduced in both orders. Deliberately built on
// forward probability flow per rule pair, independent of the backward
// recursion it is used to check.
inline GameValuePair enumerate_game_value(const FilteredLattice& lat, Kernel kernel,
                                          std::uint64_t max_rule_pairs = 1ull << 20) {
  validate(lat);
  const auto layers = layers_of(lat);
  std::vector<std::uint32_t> topo;
  std::vector<std::uint32_t> interior;
  topo.reserve(lat.size());
  for (const auto& layer : layers)
    for (std::uint32_t id : layer) {
      topo.push_back(id);
      if (!lat.is_terminal(id)) interior.push_back(id);
    }
  const std::size_t m = interior.size();
  if (m > 31 || (m > 0 && (1ull << (2 * m)) > max_rule_pairs))
    throw EnumerationCapExceeded(
        "lattice has " + std::to_string(m) +
        " interior nodes; rule-pair count exceeds the cap of " +
        std::to_string(max_rule_pairs));
  std::vector<int> interior_slot(lat.size(), -1);
  for (std::size_t i = 0; i < m; ++i) interior_slot[interior[i]] = static_cast<int>(i);

  const std::uint64_t n_rules = 1ull << m;
  std::vector<double> mass(lat.size());
  auto evaluate = [&](std::uint64_t seller_mask, std::uint64_t buyer_mask) {
    std::fill(mass.begin(), mass.end(), 0.0);
    mass[lat.root] = 1.0;
    double total = 0.0;
    for (std::uint32_t id : topo) {
      const double p = mass[id];
      if (p == 0.0) continue;
      const bool terminal = lat.is_terminal(id);
      const int slot = interior_slot[id];
      const bool ss = terminal || ((seller_mask >> slot) & 1u);
      const bool ts = terminal || ((buyer_mask >> slot) & 1u);
      if (ss || ts) {
        total += p * detail::stop_payoff(ss, ts, terminal, lat.lower[id],
                                         lat.upper[id], kernel);
        continue;
      }
      const auto kids = lat.children(id);
      const auto ps = lat.probs(id);
      for (std::size_t e = 0; e < kids.size(); ++e) mass[kids[e]] += p * ps[e];
    }
    return total;
  };

  GameValuePair out;
  std::vector<double> col_min(n_rules, std::numeric_limits<double>::infinity());
  double infsup = std::numeric_limits<double>::infinity();
  for (std::uint64_t seller = 0; seller < n_rules; ++seller) {
    double row_max = -std::numeric_limits<double>::infinity();
    for (std::uint64_t buyer = 0; buyer < n_rules; ++buyer) {
      const double v = evaluate(seller, buyer);
      row_max = std::max(row_max, v);
      col_min[buyer] = std::min(col_min[buyer], v);
    }
    infsup = std::min(infsup, row_max);
  }
  out.infsup = infsup;
  out.supinf = *std::max_element(col_min.begin(), col_min.end());
  return out;
}

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t n_paths = 0;
};

namespace detail {

inline void require_terminal_stops(const FilteredLattice& lat,
                                   const StoppingRule& rule, const char* name) {
  if (rule.stop.size() != lat.size())
    throw ConfigError(std::string(name) + ": stopping rule size mismatch");
  for (std::uint32_t id = 0; id < lat.size(); ++id)
    if (lat.is_terminal(id) && !rule.stop[id])
      throw ConfigError(std::string(name) + ": stopping rule must stop at terminals");
}

// Mean and standard error from fixed-size block sums combined in block
// order; identical output for any worker count.
template <typename Sampler>
inline McEstimate mc_reduce(std::int64_t n_samples, Sampler&& sample) {
  constexpr std::size_t kBlock = 4096;
  const std::size_t count = static_cast<std::size_t>(n_samples);
  const std::size_t n_blocks = (count + kBlock - 1) / kBlock;
  std::vector<double> block_sum(n_blocks), block_sum2(n_blocks);
  parallel_blocks(count, kBlock, [&](std::size_t b, std::size_t begin, std::size_t end) {
    KahanSum sum, sum2;
    for (std::size_t i = begin; i < end; ++i) {
      const double x = sample(i);
      sum.add(x);
      sum2.add(x * x);
    }
    block_sum[b] = sum.value();
    block_sum2[b] = sum2.value();
  });
  KahanSum sum, sum2;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    sum.add(block_sum[b]);
    sum2.add(block_sum2[b]);
  }
  McEstimate est;
  est.n_paths = n_samples;
  est.mean = sum.value() / static_cast<double>(n_samples);
  if (n_samples > 1) {
    const double variance =
        std::max(0.0, (sum2.value() - n_samples * est.mean * est.mean) /
                          static_cast<double>(n_samples - 1));
    est.std_error = std::sqrt(variance / static_cast<double>(n_samples));
  }
  return est;
}

}  // namespace detail

// Simulates the lattice transition law, plays the given rules and
// averages the kernel payoff. Counter-based per-path streams keyed by
// (seed, stream_offset + index) make runs reproducible bit-for-bit for
// any worker count.
inline McEstimate mc_price(const FilteredLattice& lat, const StoppingRule& seller,
                           const StoppingRule& buyer, Kernel kernel,
                           const McConfig& cfg, std::uint64_t stream_offset = 0) {
  validate(cfg);
  detail::require_terminal_stops(lat, seller, "seller");
  detail::require_terminal_stops(lat, buyer, "buyer");

  auto walk = [&](SplitMix64& rng, bool reflect) {
    std::uint32_t node = lat.root;
    for (;;) {
      const bool terminal = lat.is_terminal(node);
      const bool ss = seller.stop[node] != 0;
      const bool ts = buyer.stop[node] != 0;
      if (terminal || ss || ts)
        return detail::stop_payoff(ss, ts, terminal, lat.lower[node],
                                   lat.upper[node], kernel);
      double u = rng.uniform();
      if (reflect) u = 1.0 - u;
      const auto kids = lat.children(node);
      const auto ps = lat.probs(node);
      std::uint32_t chosen = kids.back();
      double cum = 0.0;
      for (std::size_t e = 0; e < kids.size(); ++e) {
        cum += ps[e];
        if (u < cum) {
          chosen = kids[e];
          break;
        }
      }
      node = chosen;
    }
  };

  if (cfg.antithetic) {
    return detail::mc_reduce(cfg.n_paths / 2, [&](std::size_t pair) {
      SplitMix64 rng1 = stream_rng(cfg.seed, RngDomain::McPath, stream_offset + pair);
      SplitMix64 rng2 = rng1;
      return 0.5 * (walk(rng1, false) + walk(rng2, true));
    });
  }
  return detail::mc_reduce(cfg.n_paths, [&](std::size_t path) {
    SplitMix64 rng = stream_rng(cfg.seed, RngDomain::McPath, stream_offset + path);
    return walk(rng, false);
  });
}

// Mean of the terminal discounted price from direct simulation of the
// discrete model; a martingale check against s0.
inline McEstimate mc_terminal_mean(const MertonParams& params, int n,
                                   const McConfig& cfg,
                                   Normalization norm = Normalization::ExactMartingale) {
  validate(cfg);
  const StepParams step = step_params(params, n, norm);
  const auto& atoms = params.jump_law.atoms;

  auto simulate = [&](SplitMix64& rng, bool reflect) {
    double log_price = 0.0;
    for (int k = 0; k < n; ++k) {
      double u = rng.uniform();
      if (reflect) u = 1.0 - u;
      log_price += u < step.p_up ? step.a : -step.a;
      if (step.jump_prob > 0.0) {
        double v = rng.uniform();
        if (reflect) v = 1.0 - v;
        if (v < step.jump_prob) {
          double w = rng.uniform();
          if (reflect) w = 1.0 - w;
          double cum = 0.0;
          double y = atoms.back().log_mult;
          for (const auto& atom : atoms) {
            cum += atom.prob;
            if (w < cum) {
              y = atom.log_mult;
              break;
            }
          }
          log_price += y;
        }
      }
    }
    return params.s0 * std::exp(log_price);
  };

  if (cfg.antithetic) {
    return detail::mc_reduce(cfg.n_paths / 2, [&](std::size_t pair) {
      SplitMix64 rng1 = stream_rng(cfg.seed, RngDomain::McPath, pair);
      SplitMix64 rng2 = rng1;
      return 0.5 * (simulate(rng1, false) + simulate(rng2, true));
    });
  }
  return detail::mc_reduce(cfg.n_paths, [&](std::size_t path) {
    SplitMix64 rng = stream_rng(cfg.seed, RngDomain::McPath, path);
    return simulate(rng, false);
  });
}

struct SaddleCase {
  bool buyer_deviation = false;  // which side deviated
  std::uint64_t index = 0;
  double estimate = 0.0;
  double std_error = 0.0;
  bool ok = false;
};

struct SaddleReport {
  double root_value = 0.0;
  std::vector<SaddleCase> cases;
  int violations = 0;
};

// Random adapted deviation: flip each interior stop flag independently
// with the given probability, keep terminal stops forced.
inline StoppingRule deviate_rule(const StoppingRule& base, const FilteredLattice& lat,
                                 SplitMix64& rng, double flip_prob = 0.3) {
  StoppingRule out = base;
  for (std::uint32_t id = 0; id < lat.size(); ++id) {
    if (lat.is_terminal(id)) {
      out.stop[id] = 1;
      continue;
    }
    if (rng.uniform() < flip_prob) out.stop[id] = out.stop[id] ? 0 : 1;
  }
  return out;
}

// Plays random unilateral deviations against the extracted optimal
// rules: no buyer deviation should beat V and no seller deviation
// should undercut it, each within 3 standard errors.
inline SaddleReport saddle_check(const FilteredLattice& lat, const DPResult& dp,
                                 Kernel kernel, const McConfig& cfg,
                                 int n_deviations, double flip_prob = 0.3) {
  validate(cfg);
  if (n_deviations < 0) throw ConfigError("n_deviations must be >= 0");
  const StrategyPair base = extract_strategies(dp, lat);
  SaddleReport report;
  report.root_value = dp.root_value;
  for (int side = 0; side < 2; ++side) {
    const bool buyer_side = side == 0;
    for (int d = 0; d < n_deviations; ++d) {
      SplitMix64 rng = stream_rng(cfg.seed, RngDomain::Deviation,
                                  (static_cast<std::uint64_t>(side) << 32) |
                                      static_cast<std::uint64_t>(d));
      const StoppingRule deviated =
          deviate_rule(buyer_side ? base.buyer : base.seller, lat, rng, flip_prob);
      const std::uint64_t offset =
          (static_cast<std::uint64_t>(side + 1) << 40) +
          (static_cast<std::uint64_t>(d + 1) << 28);
      const McEstimate est =
          buyer_side ? mc_price(lat, base.seller, deviated, kernel, cfg, offset)
                     : mc_price(lat, deviated, base.buyer, kernel, cfg, offset);
      SaddleCase c;
      c.buyer_deviation = buyer_side;
      c.index = static_cast<std::uint64_t>(d);
      c.estimate = est.mean;
      c.std_error = est.std_error;
      c.ok = buyer_side ? est.mean <= report.root_value + 3.0 * est.std_error
                        : est.mean >= report.root_value - 3.0 * est.std_error;
      if (!c.ok) ++report.violations;
      report.cases.push_back(c);
    }
  }
  return report;
}

// Random model parameters for identity sweeps. Jump probabilities are
// normalized with the last atom forced to the exact complement.
inline MertonParams random_merton_params(SplitMix64& rng) {
  MertonParams p;
  p.s0 = 0.5 + rng.uniform() * 1.5;
  p.sigma = 0.05 + rng.uniform() * 0.75;
  p.r = rng.uniform() * 0.2;
  p.lambda = rng.uniform() < 0.3 ? 0.0 : rng.uniform() * 2.0;
  p.T = 0.25 + rng.uniform() * 2.75;
  if (p.lambda > 0.0) {
    const int n_atoms = 1 + static_cast<int>(rng.uniform() * 3);
    double remaining = 1.0;
    for (int j = 0; j < n_atoms; ++j) {
      const double y = std::log(0.3) + rng.uniform() * (std::log(2.5) - std::log(0.3));
      double q;
      if (j + 1 == n_atoms) q = remaining;
      else {
        q = remaining * (0.2 + 0.6 * rng.uniform());
        remaining -= q;
      }
      p.jump_law.atoms.push_back({y, q});
    }
  }
  return p;
}

// Random layered game fixture with dyadic probabilities and payoffs, so
// enumeration identities hold exactly in floating point. Interior count
// is kept under the enumeration cap.
inline FilteredLattice random_game_lattice(SplitMix64& rng, int max_depth = 3,
                                           int max_branch = 3,
                                           std::size_t max_interior = 10) {
  auto dyadic = [&](double lo, double hi, int denom) {
    const int steps = static_cast<int>((hi - lo) * denom);
    const int pick = static_cast<int>(rng.uniform() * (steps + 1));
    return lo + static_cast<double>(std::min(pick, steps)) / denom;
  };
  for (;;) {
    const int depth = 1 + static_cast<int>(rng.uniform() * max_depth);
    FilteredLattice lat;
    lat.n_steps = depth;
    lat.edge_begin.push_back(0);
    std::vector<std::uint32_t> layer;
    lat.time_index.push_back(0);
    layer.push_back(0);
    std::size_t interior = 0;
    bool too_big = false;
    for (int k = 0; k < depth && !too_big; ++k) {
      std::vector<std::uint32_t> next;
      for (std::uint32_t id : layer) {
        (void)id;
        ++interior;
        if (interior > max_interior) {
          too_big = true;
          break;
        }
        const int branch = 1 + static_cast<int>(rng.uniform() * max_branch);
        static const std::vector<std::vector<double>> kProbs1{{1.0}};
        static const std::vector<std::vector<double>> kProbs2{
            {0.5, 0.5}, {0.25, 0.75}, {0.375, 0.625}};
        static const std::vector<std::vector<double>> kProbs3{
            {0.25, 0.25, 0.5}, {0.125, 0.375, 0.5}, {0.25, 0.5, 0.25}};
        const auto& pool = branch == 1 ? kProbs1 : branch == 2 ? kProbs2 : kProbs3;
        const auto& probs = pool[static_cast<std::size_t>(rng.uniform() * pool.size()) %
                                 pool.size()];
        for (double p : probs) {
          const auto child = static_cast<std::uint32_t>(lat.time_index.size());
          lat.time_index.push_back(k + 1);
          next.push_back(child);
          lat.edge_child.push_back(child);
          lat.edge_prob.push_back(p);
        }
        lat.edge_begin.push_back(lat.edge_child.size());
      }
      layer = std::move(next);
    }
    if (too_big) continue;
    for (std::uint32_t id : layer) {
      (void)id;
      lat.edge_begin.push_back(lat.edge_child.size());
    }
    lat.lower.resize(lat.size());
    lat.upper.resize(lat.size());
    for (std::uint32_t id = 0; id < lat.size(); ++id) {
      lat.lower[id] = dyadic(0.0, 2.0, 16);
      lat.upper[id] = lat.lower[id] + dyadic(0.0, 1.0, 16);
    }
    return lat;
  }
}

}  // namespace gamedp
