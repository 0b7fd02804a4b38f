#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gamedp/build.hpp"
#include "gamedp/errors.hpp"
#include "gamedp/oracle.hpp"
#include "gamedp/solver.hpp"

namespace gamedp {

struct ConvergenceRow {
  int n = 0;
  double value = std::numeric_limits<double>::quiet_NaN();
  std::string engine;
  std::uint64_t states = 0;
  double wall_ms = 0.0;
  bool failed = false;
  std::string error;
  double delta_prev = std::numeric_limits<double>::quiet_NaN();
  std::optional<QuantGrid> grid;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;  // sorted by n
};

// One game value per step count. Engine errors mark the row failed
// instead of aborting the sweep.
inline ConvergenceTable value_sequence(const MertonParams& params,
                                       const PayoffSpec& payoff,
                                       std::vector<int> n_list,
                                       const EngineSelection& sel = {},
                                       const BuildOptions& opts = {}) {
  if (n_list.empty()) throw ConfigError("n_list must not be empty");
  std::sort(n_list.begin(), n_list.end());
  if (std::adjacent_find(n_list.begin(), n_list.end()) != n_list.end())
    throw ConfigError("n_list contains duplicate entries");
  if (n_list.front() < 1) throw ConfigError("n_list entries must be >= 1");

  ConvergenceTable table;
  for (int n : n_list) {
    ConvergenceRow row;
    row.n = n;
    const auto start = std::chrono::steady_clock::now();
    try {
      BuiltLattice built = build_with_selection(params, payoff, n, sel, opts);
      row.states = built.lattice.size();
      row.engine = built.engine;
      row.grid = std::move(built.grid);
      row.value = solve(built.lattice).root_value;
    } catch (const Error& e) {
      row.failed = true;
      row.error = e.what();
    }
    row.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    table.rows.push_back(std::move(row));
  }
  const ConvergenceRow* prev = nullptr;
  for (auto& row : table.rows) {
    if (row.failed) continue;
    if (prev) row.delta_prev = std::abs(row.value - prev->value);
    prev = &row;
  }
  return table;
}

struct RatioEntry {
  int n = 0;
  std::optional<double> ratio;  // Delta_{2n}/Delta_n; absent when exact
};

struct RichardsonResult {
  double limit = 0.0;
  bool exact = false;  // consecutive values identical, limit hit exactly
  std::vector<RatioEntry> ratios;
};

// Aitken extrapolation on the largest (n, 2n, 4n) triple in the table,
// plus the per-step delta ratios.
inline RichardsonResult richardson(const ConvergenceTable& table) {
  std::map<int, double> values;
  for (const auto& row : table.rows)
    if (!row.failed) values[row.n] = row.value;

  RichardsonResult out;
  bool found = false;
  for (auto it = values.rbegin(); it != values.rend(); ++it) {
    // iterate descending; the first n with n/2 and n/4 present wins
    const int n4 = it->first;
    if (n4 % 4 != 0) continue;
    auto i2 = values.find(n4 / 2);
    auto i1 = values.find(n4 / 4);
    if (i2 == values.end() || i1 == values.end()) continue;
    const double v1 = i1->second, v2 = i2->second, v3 = it->second;
    const double d1 = v2 - v1, d2 = v3 - v2;
    if (d2 == 0.0 && d1 == 0.0) {
      out.limit = v3;
      out.exact = true;
    } else if (d2 - d1 == 0.0) {
      out.limit = v3;
    } else {
      out.limit = v3 - d2 * d2 / (d2 - d1);
    }
    found = true;
    break;
  }
  if (!found)
    throw InsufficientRows("richardson needs three successful rows at doubling n");
  for (const auto& [n, v] : values) {
    auto i2 = values.find(2 * n);
    auto i4 = values.find(4 * n);
    if (i2 == values.end() || i4 == values.end()) continue;
    const double dn = i2->second - v;
    const double d2n = i4->second - i2->second;
    RatioEntry entry;
    entry.n = n;
    if (dn != 0.0) entry.ratio = d2n / dn;
    out.ratios.push_back(entry);
  }
  return out;
}

struct GridGapBound {
  double term1 = 0.0;        // (2rT/n)(scale + E sup e^{rt} S_t)
  double term2 = 0.0;        // 2 e^{rT} (rT/n) E sup S_t
  double term3_proxy = 0.0;  // (delta + 2 e^{rT}) max_k E|S_{(k+1)dt} - S_{k dt}|
  double total = 0.0;
  double e_sup_accrued = 0.0;
  double se_sup_accrued = 0.0;
  double e_sup = 0.0;
  double se_sup = 0.0;
  double max_mean_increment = 0.0;
};

// Computable diagnostic for the distance between the grid game value
// and the game value of the piecewise-constant process. The first two
// terms estimate the time-discounting drift over one grid cell; the
// third replaces an uncomputable supremum over stopping times with the
// deterministic-time proxy max_k E|increment| and is heuristic: it is
// exact for deterministic stopping and captures the 1/n diffusion
// scaling, but understates jump contributions near optimal rules.
inline GridGapBound grid_gap_bound(const MertonParams& params,
                                   const PayoffSpec& payoff, int n,
                                   const McConfig& cfg,
                                   Normalization norm = Normalization::ExactMartingale) {
  validate(cfg);
  validate(payoff);
  const StepParams step = step_params(params, n, norm);
  const auto& atoms = params.jump_law.atoms;

  struct Block {
    double sup_accrued = 0.0, sup_accrued2 = 0.0;
    double sup = 0.0, sup2 = 0.0;
    std::vector<double> abs_increment;
  };

  // One path: returns (sup accrued, sup) and adds |P_{k+1}-P_k| per step.
  auto simulate = [&](SplitMix64& rng, bool reflect, std::vector<double>& inc) {
    double log_price = 0.0;
    double price = params.s0;
    double sup_accrued = 0.0;
    double sup = price;
    for (int k = 0; k < n; ++k) {
      sup_accrued = std::max(
          sup_accrued, std::exp(params.r * (k + 1) * step.dt) * price);
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
      const double next_price = params.s0 * std::exp(log_price);
      inc[k] += std::abs(next_price - price);
      price = next_price;
      sup = std::max(sup, price);
    }
    sup_accrued = std::max(sup_accrued, std::exp(params.r * params.T) * price);
    return std::pair<double, double>{sup_accrued, sup};
  };

  constexpr std::size_t kBlock = 4096;
  const std::size_t n_samples =
      static_cast<std::size_t>(cfg.antithetic ? cfg.n_paths / 2 : cfg.n_paths);
  const std::size_t n_blocks = (n_samples + kBlock - 1) / kBlock;
  std::vector<Block> blocks(n_blocks);
  parallel_blocks(n_samples, kBlock, [&](std::size_t b, std::size_t begin, std::size_t end) {
    Block& blk = blocks[b];
    blk.abs_increment.assign(n, 0.0);
    for (std::size_t i = begin; i < end; ++i) {
      SplitMix64 rng = stream_rng(cfg.seed, RngDomain::McPath, i);
      if (cfg.antithetic) {
        SplitMix64 rng2 = rng;
        auto [sa1, s1] = simulate(rng, false, blk.abs_increment);
        auto [sa2, s2] = simulate(rng2, true, blk.abs_increment);
        const double sa = 0.5 * (sa1 + sa2), s = 0.5 * (s1 + s2);
        blk.sup_accrued += sa;
        blk.sup_accrued2 += sa * sa;
        blk.sup += s;
        blk.sup2 += s * s;
      } else {
        auto [sa, s] = simulate(rng, false, blk.abs_increment);
        blk.sup_accrued += sa;
        blk.sup_accrued2 += sa * sa;
        blk.sup += s;
        blk.sup2 += s * s;
      }
    }
  });

  KahanSum sup_accrued, sup_accrued2, sup, sup2;
  std::vector<KahanSum> inc(n);
  for (const auto& blk : blocks) {
    sup_accrued.add(blk.sup_accrued);
    sup_accrued2.add(blk.sup_accrued2);
    sup.add(blk.sup);
    sup2.add(blk.sup2);
    for (int k = 0; k < n; ++k) inc[k].add(blk.abs_increment[k]);
  }
  const double m = static_cast<double>(n_samples);
  const double total_paths = static_cast<double>(cfg.antithetic ? 2 * n_samples : n_samples);

  GridGapBound out;
  out.e_sup_accrued = sup_accrued.value() / m;
  out.e_sup = sup.value() / m;
  auto se = [&](double s, double s2, double mean) {
    if (n_samples < 2) return 0.0;
    const double var = std::max(0.0, (s2 - m * mean * mean) / (m - 1.0));
    (void)s;
    return std::sqrt(var / m);
  };
  out.se_sup_accrued = se(sup_accrued.value(), sup_accrued2.value(), out.e_sup_accrued);
  out.se_sup = se(sup.value(), sup2.value(), out.e_sup);
  for (int k = 0; k < n; ++k)
    out.max_mean_increment =
        std::max(out.max_mean_increment, inc[k].value() / total_paths);

  const double scale = payoff.kind == PayoffKind::Russian ? payoff.M
                       : payoff.kind == PayoffKind::Asian ? params.s0
                                                          : payoff.K;
  const double rT_over_n = params.r * params.T / n;
  out.term1 = 2.0 * rT_over_n * (scale + out.e_sup_accrued);
  out.term2 = 2.0 * std::exp(params.r * params.T) * rT_over_n * out.e_sup;
  out.term3_proxy =
      (payoff.delta + 2.0 * std::exp(params.r * params.T)) * out.max_mean_increment;
  out.total = out.term1 + out.term2 + out.term3_proxy;
  return out;
}

}  // namespace gamedp
