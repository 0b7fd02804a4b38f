#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gamedp/errors.hpp"

namespace gamedp {

// One atom of the finite jump law: the log multiplier y = ln(1+U) and
// its probability q.
struct JumpAtom {
  double log_mult = 0.0;
  double prob = 0.0;
};

// Finite discrete distribution of jump multipliers 1+U, U > -1.
struct JumpLaw {
  std::vector<JumpAtom> atoms;
};

inline void validate(const JumpLaw& law) {
  if (law.atoms.empty())
    throw ConfigError("jump_law.atoms must contain at least one atom");
  double total = 0.0;
  for (const auto& atom : law.atoms) {
    if (!std::isfinite(atom.log_mult))
      throw ConfigError("jump_law.atoms: log multiplier must be finite");
    if (!(atom.prob > 0.0) || !std::isfinite(atom.prob))
      throw ConfigError("jump_law.atoms: every probability must be > 0");
    total += atom.prob;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw ConfigError("jump_law.atoms: probabilities must sum to 1");
}

// Continuous-model parameters. The martingale drift mu = -lambda*E[U1]
// is derived where needed, never stored.
struct MertonParams {
  double s0 = 1.0;      // initial discounted price
  double sigma = 0.2;   // diffusion volatility, 1/sqrt(year)
  double r = 0.0;       // interest rate, 1/year
  double lambda = 0.0;  // jump intensity, 1/year
  double T = 1.0;       // horizon, years
  JumpLaw jump_law;     // may be empty when lambda == 0
};

inline void validate(const MertonParams& p) {
  if (!(p.s0 > 0.0) || !std::isfinite(p.s0))
    throw ConfigError("model.s0 must be > 0");
  if (!(p.sigma > 0.0) || !std::isfinite(p.sigma))
    throw ConfigError("model.sigma must be > 0");
  if (!(p.r >= 0.0) || !std::isfinite(p.r))
    throw ConfigError("model.r must be >= 0");
  if (!(p.lambda >= 0.0) || !std::isfinite(p.lambda))
    throw ConfigError("model.lambda must be >= 0");
  if (!(p.T > 0.0) || !std::isfinite(p.T))
    throw ConfigError("model.T must be > 0");
  if (p.lambda > 0.0) validate(p.jump_law);
}

// E[U1] = sum q_j (e^{y_j} - 1). Zero for an empty law.
inline double mean_jump(const JumpLaw& law) {
  double sum = 0.0;
  for (const auto& atom : law.atoms) sum += atom.prob * std::expm1(atom.log_mult);
  return sum;
}

// Per-step laws of the n-step discrete model.
struct StepParams {
  int n = 1;
  double dt = 0.0;         // T/n
  double a = 0.0;          // sigma * sqrt(T/n), log-price step
  double p_up = 0.5;       // P{rho = +1}
  double jump_prob = 0.0;  // lambda * T / n
};

// Calibration target for E[exp(a*rho)].
enum class Normalization {
  // n / (n + lambda*T*E[U1]): the one-step discounted price has mean
  // exactly 1, so the discrete model is an exact martingale.
  ExactMartingale,
  // n / (n - lambda^2*T*E[U1]): alternative normalization kept behind a
  // compatibility flag for comparison runs. Not a martingale when
  // lambda > 0 and E[U1] != 0; never used by default.
  Compat,
};

namespace detail {

// Returns p_up in [0,1], or an out-of-range value when n is too coarse.
inline double solve_p_up(const MertonParams& params, int n, Normalization norm) {
  const double a = params.sigma * std::sqrt(params.T / n);
  const double eu = params.lambda > 0.0 ? mean_jump(params.jump_law) : 0.0;
  const double target =
      norm == Normalization::ExactMartingale
          ? n / (n + params.lambda * params.T * eu)
          : n / (n - params.lambda * params.lambda * params.T * eu);
  return (target - std::exp(-a)) / (std::exp(a) - std::exp(-a));
}

inline bool step_valid(const MertonParams& params, int n, Normalization norm) {
  if (params.lambda * params.T / n > 1.0) return false;
  const double p = solve_p_up(params, n, norm);
  return p >= 0.0 && p <= 1.0 && std::isfinite(p);
}

}  // namespace detail

// Smallest n at which the discretization is valid.
inline int min_valid_step_count(const MertonParams& params,
                                Normalization norm = Normalization::ExactMartingale) {
  validate(params);
  for (int n = 1; n <= (1 << 26); n = n < 1024 ? n + 1 : n + n / 64)
    if (detail::step_valid(params, n, norm)) {
      // The additive scan may overshoot the exact boundary; walk back.
      int lo = n;
      while (lo > 1 && detail::step_valid(params, lo - 1, norm)) --lo;
      return lo;
    }
  throw ConfigError("no valid step count found below 2^26");
}

// Branch probabilities for the n-step model. p_up solves
//   p e^a + (1-p) e^{-a} = n / (n + lambda*T*E[U1]),
// which makes one_step_mean_factor exactly 1.
inline StepParams step_params(const MertonParams& params, int n,
                              Normalization norm = Normalization::ExactMartingale) {
  validate(params);
  if (n < 1) throw ConfigError("n must be >= 1");
  StepParams step;
  step.n = n;
  step.dt = params.T / n;
  step.a = params.sigma * std::sqrt(step.dt);
  step.jump_prob = params.lambda * params.T / n;
  step.p_up = detail::solve_p_up(params, n, norm);
  if (step.jump_prob > 1.0 || !(step.p_up >= 0.0 && step.p_up <= 1.0) ||
      !std::isfinite(step.p_up)) {
    int min_n = min_valid_step_count(params, norm);
    throw StepTooCoarse("n=" + std::to_string(n) +
                            " is too coarse for these parameters; minimal valid n is " +
                            std::to_string(min_n),
                        min_n);
  }
  return step;
}

// E[exp(a*rho)] * E[(1+U)^xi]; equals 1 (within 1e-12) for any
// step_params output under the exact-martingale normalization.
inline double one_step_mean_factor(const StepParams& step, const JumpLaw& law) {
  const double diffusion =
      step.p_up * std::exp(step.a) + (1.0 - step.p_up) * std::exp(-step.a);
  const double eu = law.atoms.empty() ? 0.0 : mean_jump(law);
  return diffusion * (1.0 + step.jump_prob * eu);
}

}  // namespace gamedp
