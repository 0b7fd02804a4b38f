#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gamedp/errors.hpp"
#include "gamedp/graph.hpp"
#include "gamedp/model.hpp"
#include "gamedp/payoff.hpp"

namespace gamedp {

struct BuildOptions {
  int exact_step_cap = 14;              // max n for the exact engine
  std::size_t max_states = 40'000'000;  // node budget, either engine
  Normalization normalization = Normalization::ExactMartingale;
};

// Quantization of the state space for the approximate engine. The
// log-price step is exact (a from StepParams); the statistic lives on
// the finer grid h = a/q and is rounded up; jump log-sizes snap to the
// nearest multiple of h; jump counts are capped at j_max, chosen from
// the exact Bernoulli-product tail.
struct QuantGrid {
  int q = 1;
  double h = 0.0;
  double eps_tail = 1e-9;
  int j_max = 0;
  double tail_mass = 0.0;              // exact P(total jumps > j_max)
  std::vector<long long> snapped;      // per-atom log-size in grid units
  std::vector<double> residuals;       // |y_j - snapped_j * h|, <= h/2
};

// P(X > c) for X ~ Binomial(n, p), via the pmf product recurrence.
inline double binomial_tail_above(int n, double p, int c) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return c < n ? 1.0 : 0.0;
  double pmf = std::pow(1.0 - p, n);
  double cdf = pmf;
  for (int k = 0; k < std::min(c, n); ++k) {
    pmf *= (static_cast<double>(n - k) / (k + 1)) * (p / (1.0 - p));
    cdf += pmf;
  }
  return std::max(0.0, 1.0 - cdf);
}

inline QuantGrid make_quant_grid(const StepParams& step, const JumpLaw& law,
                                 int q, double eps_tail = 1e-9) {
  if (q < 1) throw ConfigError("engine.q must be >= 1");
  if (!(eps_tail > 0.0) || eps_tail > 1.0)
    throw ConfigError("engine.eps_tail must be in (0, 1]");
  QuantGrid grid;
  grid.q = q;
  grid.h = step.a / q;
  grid.eps_tail = eps_tail;
  const bool jumps = step.jump_prob > 0.0 && !law.atoms.empty();
  if (jumps) {
    for (const auto& atom : law.atoms) {
      long long snapped = std::llround(atom.log_mult / grid.h);
      grid.snapped.push_back(snapped);
      grid.residuals.push_back(std::abs(atom.log_mult - snapped * grid.h));
    }
    int c = 0;
    while (binomial_tail_above(step.n, step.jump_prob, c) > eps_tail) ++c;
    grid.j_max = c;
    grid.tail_mass = binomial_tail_above(step.n, step.jump_prob, c);
    if (grid.j_max > 255)
      throw GridOverflow("jump-count cap " + std::to_string(grid.j_max) +
                             " exceeds the supported range",
                         static_cast<std::uint64_t>(grid.j_max));
  }
  return grid;
}

namespace detail {

struct LatticeAssembler {
  FilteredLattice lat;
  std::size_t max_states;

  explicit LatticeAssembler(int n_steps, std::size_t budget) : max_states(budget) {
    lat.n_steps = n_steps;
    lat.edge_begin.push_back(0);
  }

  std::uint32_t add_node(int k) {
    lat.time_index.push_back(k);
    return static_cast<std::uint32_t>(lat.time_index.size() - 1);
  }

  void set_payoffs(std::uint32_t id, double psi, double phi) {
    if (lat.lower.size() <= id) {
      lat.lower.resize(id + 1);
      lat.upper.resize(id + 1);
    }
    lat.lower[id] = psi;
    lat.upper[id] = phi;
  }

  // Edges must be appended in node-id order, one parent after another.
  void add_edges(const std::vector<std::pair<std::uint32_t, double>>& kids) {
    for (const auto& [child, prob] : kids) {
      lat.edge_child.push_back(child);
      lat.edge_prob.push_back(prob);
    }
    lat.edge_begin.push_back(lat.edge_child.size());
  }
};

// Branch weights of the per-step product law (rho x jump indicator x
// jump atom). Zero-weight branches are omitted entirely.
struct StepBranch {
  int diffusion_sign;  // +1 or -1
  int atom;            // -1 for no jump
  double weight;
};

inline std::vector<StepBranch> step_branches(const StepParams& step,
                                             const JumpLaw& law) {
  std::vector<StepBranch> out;
  const double jp = step.jump_prob;
  for (int sign : {+1, -1}) {
    const double pd = sign > 0 ? step.p_up : 1.0 - step.p_up;
    if (pd == 0.0) continue;
    if (jp < 1.0) out.push_back({sign, -1, pd * (1.0 - jp)});
    if (jp > 0.0)
      for (std::size_t j = 0; j < law.atoms.size(); ++j)
        out.push_back({sign, static_cast<int>(j), pd * jp * law.atoms[j].prob});
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Exact engine
// ---------------------------------------------------------------------------

// State key of the exact engine. Prices are decoded canonically from
// (displacement, per-atom jump counts), so equal keys mean bit-equal
// prices; the running statistic is keyed by its exact bit pattern,
// which merges every pair of states with identical downstream payoffs.
struct ExactKey {
  std::int32_t disp = 0;       // net Rademacher displacement
  std::uint64_t counts = 0;    // per-atom jump counts, 8 bits each
  std::uint64_t stat_bits = 0; // statistic value, bit pattern

  bool operator==(const ExactKey&) const = default;
};

struct ExactKeyHash {
  std::size_t operator()(const ExactKey& k) const {
    std::uint64_t h = mix_(static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.disp)));
    h = mix_(h ^ k.counts);
    h = mix_(h ^ k.stat_bits);
    return static_cast<std::size_t>(h);
  }

 private:
  static std::uint64_t mix_(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
};

inline int exact_counts_get(std::uint64_t counts, int atom) {
  return static_cast<int>((counts >> (8 * atom)) & 0xFFu);
}

inline std::uint64_t exact_counts_bump(std::uint64_t counts, int atom) {
  return counts + (1ull << (8 * atom));
}

// Exact recombining engine: layered DAG over ExactKeys, every state
// merged whenever displacement, jump counts and statistic coincide.
inline FilteredLattice build_exact(const MertonParams& params,
                                   const PayoffSpec& payoff, int n,
                                   const BuildOptions& opts = {}) {
  validate(payoff);
  const StepParams step = step_params(params, n, opts.normalization);
  if (n > opts.exact_step_cap)
    throw ExactCapExceeded("exact engine capped at n <= " +
                           std::to_string(opts.exact_step_cap) + "; requested n=" +
                           std::to_string(n));
  if (n > 255) throw ExactCapExceeded("exact engine limited to n <= 255");
  const bool jumps = step.jump_prob > 0.0;
  if (jumps && params.jump_law.atoms.size() > 8)
    throw ExactCapExceeded("exact engine supports at most 8 jump atoms");

  const auto branches = detail::step_branches(step, params.jump_law);
  const auto& atoms = params.jump_law.atoms;

  auto price_of = [&](const ExactKey& key) {
    double log_price = key.disp * step.a;
    for (std::size_t j = 0; j < atoms.size(); ++j)
      log_price += exact_counts_get(key.counts, static_cast<int>(j)) * atoms[j].log_mult;
    return params.s0 * std::exp(log_price);
  };
  auto stat_of = [](const ExactKey& key) {
    return PathStatistic{std::bit_cast<double>(key.stat_bits)};
  };

  detail::LatticeAssembler out(n, opts.max_states);
  std::vector<ExactKey> layer{
      ExactKey{0, 0, std::bit_cast<std::uint64_t>(statistic_init(payoff).value)}};
  out.add_node(0);

  std::uint32_t first_id = 0;
  for (int k = 0; k < n; ++k) {
    std::unordered_map<ExactKey, std::uint32_t, ExactKeyHash> next_ids;
    next_ids.reserve(layer.size() * branches.size());
    std::vector<ExactKey> next_layer;
    std::vector<std::pair<std::uint32_t, double>> kids;
    for (std::size_t idx = 0; idx < layer.size(); ++idx) {
      const ExactKey& key = layer[idx];
      const std::uint32_t id = first_id + static_cast<std::uint32_t>(idx);
      const double price = price_of(key);
      const PathStatistic stat = stat_of(key);
      out.set_payoffs(id, eval_lower(payoff, k, stat, price, step.dt),
                      eval_upper(payoff, k, stat, price, step.dt));
      const std::uint64_t folded = std::bit_cast<std::uint64_t>(
          statistic_step(payoff, stat, k, price, step.dt).value);
      kids.clear();
      for (const auto& branch : branches) {
        ExactKey child{key.disp + branch.diffusion_sign, key.counts, folded};
        if (branch.atom >= 0) child.counts = exact_counts_bump(child.counts, branch.atom);
        auto [it, inserted] = next_ids.try_emplace(
            child, static_cast<std::uint32_t>(out.lat.time_index.size()));
        if (inserted) {
          if (out.lat.time_index.size() >= out.max_states)
            throw ExactCapExceeded("exact engine exceeded the state budget of " +
                                   std::to_string(out.max_states) + " nodes");
          out.add_node(k + 1);
          next_layer.push_back(child);
        }
        kids.emplace_back(it->second, branch.weight);
      }
      out.add_edges(kids);
    }
    first_id += static_cast<std::uint32_t>(layer.size());
    layer = std::move(next_layer);
  }
  // Terminal layer: payoffs only.
  for (std::size_t idx = 0; idx < layer.size(); ++idx) {
    const ExactKey& key = layer[idx];
    const std::uint32_t id = first_id + static_cast<std::uint32_t>(idx);
    const double price = price_of(key);
    out.set_payoffs(id, eval_lower(payoff, n, stat_of(key), price, step.dt),
                    eval_upper(payoff, n, stat_of(key), price, step.dt));
    out.add_edges({});
  }
  return std::move(out.lat);
}

// ---------------------------------------------------------------------------
// Quantized engine
// ---------------------------------------------------------------------------

namespace detail {

// Packed (price index, statistic index, jump count) key.
inline std::uint64_t qkey(long long ip, long long is, int jc) {
  constexpr long long kOffset = 1ll << 24;
  if (ip <= -kOffset || ip >= kOffset || is <= -kOffset || is >= kOffset)
    throw GridOverflow("quantized state index out of range", 0);
  return (static_cast<std::uint64_t>(ip + kOffset) << 33) |
         (static_cast<std::uint64_t>(is + kOffset) << 8) |
         static_cast<std::uint64_t>(jc);
}

}  // namespace detail

// Markov engine on the h-grid: states are (time, price index, rounded-up
// statistic index, capped jump count). Jump branches beyond the j_max
// cap are folded into the matching no-jump branch, so the per-node
// transition law always sums to 1.
inline FilteredLattice build_quantized(const MertonParams& params,
                                       const PayoffSpec& payoff, int n,
                                       const QuantGrid& grid,
                                       const BuildOptions& opts = {}) {
  validate(payoff);
  const StepParams step = step_params(params, n, opts.normalization);
  if (std::abs(grid.h * grid.q - step.a) > 1e-12 * step.a)
    throw ConfigError("engine.q: grid step does not match sigma*sqrt(T/n)/q");
  const bool jumps = step.jump_prob > 0.0;
  const auto& atoms = params.jump_law.atoms;
  if (jumps && grid.snapped.size() != atoms.size())
    throw ConfigError("engine: quantization grid built for a different jump law");

  const double h = grid.h;
  const bool russian = payoff.kind == PayoffKind::Russian;
  const bool asian = payoff.kind == PayoffKind::Asian;

  // Russian: statistic index is the rounded-up grid position of the
  // running accrued maximum, clamped below at the floor index so that
  // states whose maximum never exceeded M stay merged and the floor
  // stays exact. Asian: additive grid of width s0*T*h/n on the integral.
  long long floor_idx = 0;
  if (russian) {
    floor_idx = static_cast<long long>(std::floor(std::log(payoff.M / params.s0) / h));
    while (params.s0 * std::exp(floor_idx * h) > payoff.M) --floor_idx;
  }
  const double asian_cell = params.s0 * params.T * h / n;

  auto stat_value = [&](long long is) {
    if (russian) return std::max(payoff.M, params.s0 * std::exp(is * h));
    if (asian) return is * asian_cell;
    return 0.0;
  };
  auto fold_stat = [&](long long ip, long long is, int k) -> long long {
    if (russian) {
      const long long cand =
          ip + static_cast<long long>(std::ceil(payoff.r * (k + 1) * step.dt / h));
      return std::max(is, std::max(cand, floor_idx));
    }
    if (asian) {
      const double price = params.s0 * std::exp(ip * h);
      const double folded =
          is * asian_cell + std::exp(payoff.r * k * step.dt) * price * step.dt;
      return static_cast<long long>(std::ceil(folded / asian_cell));
    }
    return 0;
  };

  const auto branches = detail::step_branches(step, params.jump_law);

  struct QNode {
    long long ip;
    long long is;
    int jc;
  };

  detail::LatticeAssembler out(n, opts.max_states);
  std::vector<QNode> layer{{0, russian ? floor_idx : 0, 0}};
  out.add_node(0);

  std::uint32_t first_id = 0;
  std::vector<std::pair<std::uint32_t, double>> kids;
  for (int k = 0; k < n; ++k) {
    std::unordered_map<std::uint64_t, std::uint32_t> next_ids;
    next_ids.reserve(layer.size() * 2);
    std::vector<QNode> next_layer;
    for (std::size_t idx = 0; idx < layer.size(); ++idx) {
      const QNode& node = layer[idx];
      const std::uint32_t id = first_id + static_cast<std::uint32_t>(idx);
      const double price = params.s0 * std::exp(node.ip * h);
      const PathStatistic stat{stat_value(node.is)};
      out.set_payoffs(id, eval_lower(payoff, k, stat, price, step.dt),
                      eval_upper(payoff, k, stat, price, step.dt));
      const long long folded = fold_stat(node.ip, node.is, k);
      kids.clear();
      auto emit = [&](long long ip, int jc, double weight) {
        const std::uint64_t key = detail::qkey(ip, folded, jc);
        auto [it, inserted] = next_ids.try_emplace(
            key, static_cast<std::uint32_t>(out.lat.time_index.size()));
        if (inserted) {
          if (out.lat.time_index.size() >= out.max_states)
            throw GridOverflow("quantized engine exceeded the state budget of " +
                                   std::to_string(out.max_states) + " nodes",
                               out.lat.time_index.size());
          out.add_node(k + 1);
          next_layer.push_back({ip, folded, jc});
        }
        const std::uint32_t child = it->second;
        for (auto& kid : kids)
          if (kid.first == child) {
            kid.second += weight;
            return;
          }
        kids.emplace_back(child, weight);
      };
      for (const auto& branch : branches) {
        const long long diffused = node.ip + branch.diffusion_sign * grid.q;
        if (branch.atom < 0) {
          emit(diffused, node.jc, branch.weight);
        } else if (node.jc < grid.j_max) {
          emit(diffused + grid.snapped[branch.atom], node.jc + 1, branch.weight);
        } else {
          // Jump-count cap reached: fold the jump mass into the
          // same-direction diffusion branch.
          emit(diffused, node.jc, branch.weight);
        }
      }
      out.add_edges(kids);
    }
    first_id += static_cast<std::uint32_t>(layer.size());
    layer = std::move(next_layer);
  }
  for (std::size_t idx = 0; idx < layer.size(); ++idx) {
    const QNode& node = layer[idx];
    const std::uint32_t id = first_id + static_cast<std::uint32_t>(idx);
    const double price = params.s0 * std::exp(node.ip * h);
    const PathStatistic stat{stat_value(node.is)};
    out.set_payoffs(id, eval_lower(payoff, n, stat, price, step.dt),
                    eval_upper(payoff, n, stat, price, step.dt));
    out.add_edges({});
  }
  return std::move(out.lat);
}

// ---------------------------------------------------------------------------
// Engine selection
// ---------------------------------------------------------------------------

struct EngineSelection {
  enum class Kind { Auto, Exact, Quantized } kind = Kind::Auto;
  int q = 2;               // quantization factor
  double eps_tail = 1e-9;  // jump tail mass bound
};

struct BuiltLattice {
  FilteredLattice lattice;
  std::string engine;  // "exact" or "quantized(q=..)"
  std::optional<QuantGrid> grid;
};

inline BuiltLattice build_with_selection(const MertonParams& params,
                                         const PayoffSpec& payoff, int n,
                                         const EngineSelection& sel,
                                         const BuildOptions& opts = {}) {
  const bool exact =
      sel.kind == EngineSelection::Kind::Exact ||
      (sel.kind == EngineSelection::Kind::Auto && n <= opts.exact_step_cap);
  BuiltLattice built;
  if (exact) {
    built.lattice = build_exact(params, payoff, n, opts);
    built.engine = "exact";
  } else {
    const StepParams step = step_params(params, n, opts.normalization);
    QuantGrid grid = make_quant_grid(step, params.jump_law, sel.q, sel.eps_tail);
    built.lattice = build_quantized(params, payoff, n, grid, opts);
    built.engine = "quantized(q=" + std::to_string(sel.q) + ")";
    built.grid = std::move(grid);
  }
  return built;
}

}  // namespace gamedp
