#pragma once

#include <cmath>
#include <vector>

#include "gamedp/graph.hpp"
#include "gamedp/model.hpp"
#include "gamedp/payoff.hpp"

namespace testutil {

// Independent pure-American backward induction (Snell envelope of the
// lower payoff). Plain summation, no shared code with the game solver.
inline double snell_value(const gamedp::FilteredLattice& lat) {
  std::vector<double> v(lat.size(), 0.0);
  const auto layers = gamedp::layers_of(lat);
  for (int k = lat.n_steps; k >= 0; --k) {
    for (auto id : layers[k]) {
      if (k == lat.n_steps) {
        v[id] = lat.lower[id];
        continue;
      }
      double cont = 0.0;
      const auto kids = lat.children(id);
      const auto ps = lat.probs(id);
      for (std::size_t e = 0; e < kids.size(); ++e) cont += ps[e] * v[kids[e]];
      v[id] = std::max(lat.lower[id], cont);
    }
  }
  return v[lat.root];
}

// A concrete grid path: per-step diffusion signs, jump indicators and
// jump log-sizes (entries used only where jumped[i] is true).
struct GridPath {
  std::vector<int> signs;        // +1/-1
  std::vector<int> jumped;       // 0/1
  std::vector<double> jump_logs;
};

// Price after i steps, computed from scratch.
inline double path_price(const gamedp::MertonParams& params, double a,
                         const GridPath& path, int i) {
  double log_price = 0.0;
  for (int j = 0; j < i; ++j) {
    log_price += a * path.signs[j];
    if (path.jumped[j]) log_price += path.jump_logs[j];
  }
  return params.s0 * std::exp(log_price);
}

// Literal double-loop evaluation of the Russian lower payoff on a grid
// path prefix: discount times the max over 0 <= i <= k of the floor M
// and the accrued prefix prices, with the accrual exponent capped at k.
inline double direct_russian_lower(const gamedp::MertonParams& params, double M,
                                   int n, const GridPath& path, int k) {
  const double dt = params.T / n;
  const double a = params.sigma * std::sqrt(dt);
  double best = M;
  for (int i = 0; i <= k; ++i) {
    const double accrual = params.r * std::min(i + 1, k) * dt;
    best = std::max(best, std::exp(accrual) * path_price(params, a, path, i));
  }
  return std::exp(-params.r * k * dt) * best;
}

// Literal left-endpoint running average of the accrued price.
inline double direct_asian_lower(const gamedp::MertonParams& params, int n,
                                 const GridPath& path, int k) {
  const double dt = params.T / n;
  const double a = params.sigma * std::sqrt(dt);
  if (k == 0) return params.s0;
  double integral = 0.0;
  for (int i = 0; i < k; ++i)
    integral += std::exp(params.r * i * dt) * path_price(params, a, path, i) * dt;
  return std::exp(-params.r * k * dt) * integral / (k * dt);
}

}  // namespace testutil
