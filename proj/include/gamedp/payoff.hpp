#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "gamedp/errors.hpp"

namespace gamedp {

enum class PayoffKind { Russian, GamePut, GameCall, Asian };

inline const char* to_string(PayoffKind k) {
  switch (k) {
    case PayoffKind::Russian:  return "russian";
    case PayoffKind::GamePut:  return "game_put";
    case PayoffKind::GameCall: return "game_call";
    case PayoffKind::Asian:    return "asian";
  }
  return "?";
}

// Lower/upper discounted payoff family. The upper payoff is always
// lower + delta * price (the cancellation penalty is proportional to
// the current discounted price).
struct PayoffSpec {
  PayoffKind kind = PayoffKind::Russian;
  double r = 0.0;      // interest rate, shared with the model
  double delta = 0.0;  // penalty rate
  double M = 1.0;      // floor level (Russian)
  double K = 1.0;      // strike (put/call)
};

inline void validate(const PayoffSpec& spec) {
  if (!(spec.delta >= 0.0) || !std::isfinite(spec.delta))
    throw ConfigError("payoff.delta must be >= 0");
  if (!(spec.r >= 0.0) || !std::isfinite(spec.r))
    throw ConfigError("payoff.r must be >= 0");
  if (spec.kind == PayoffKind::Russian && !(spec.M > 0.0))
    throw ConfigError("payoff.M must be > 0");
  if ((spec.kind == PayoffKind::GamePut || spec.kind == PayoffKind::GameCall) &&
      !(spec.K > 0.0))
    throw ConfigError("payoff.K must be > 0");
}

// Markov-reducing running statistic:
//   Russian -> accrued running maximum, floored at M;
//   Asian   -> running integral of the accrued price (currency * years);
//   put/call -> unused (kept at 0).
struct PathStatistic {
  double value = 0.0;
};

inline PathStatistic statistic_init(const PayoffSpec& spec) {
  switch (spec.kind) {
    case PayoffKind::Russian: return {spec.M};
    default:                  return {0.0};
  }
}

// Folds price P_k once segment k is fully in the past. A completed
// segment accrues interest to its right endpoint (k+1)*dt; the live
// segment is handled at evaluation time with accrual capped at k*dt.
inline PathStatistic statistic_step(const PayoffSpec& spec, PathStatistic stat,
                                    int k, double price, double dt) {
  switch (spec.kind) {
    case PayoffKind::Russian:
      return {std::max(stat.value, std::exp(spec.r * (k + 1) * dt) * price)};
    case PayoffKind::Asian:
      // Left-endpoint rectangle rule on the accrued price.
      return {stat.value + std::exp(spec.r * k * dt) * price * dt};
    default:
      return stat;
  }
}

// Lower payoff psi_k. `stat` is the statistic after folding P_0..P_{k-1};
// `price` is P_k.
inline double eval_lower(const PayoffSpec& spec, int k, PathStatistic stat,
                         double price, double dt) {
  const double t = k * dt;
  const double discount = std::exp(-spec.r * t);
  const double accrued = std::exp(spec.r * t) * price;
  switch (spec.kind) {
    case PayoffKind::Russian:
      return discount * std::max(stat.value, accrued);
    case PayoffKind::GamePut:
      return discount * std::max(0.0, spec.K - accrued);
    case PayoffKind::GameCall:
      return discount * std::max(0.0, accrued - spec.K);
    case PayoffKind::Asian: {
      // Running time-average of the accrued price; the k = 0 value is
      // the t -> 0 limit of (1/t) * integral, i.e. the spot price.
      const double average = k == 0 ? price : stat.value / t;
      return discount * average;
    }
  }
  return 0.0;
}

// Upper payoff phi_k = psi_k + delta * P_k.
inline double eval_upper(const PayoffSpec& spec, int k, PathStatistic stat,
                         double price, double dt) {
  return eval_lower(spec, k, stat, price, dt) + spec.delta * price;
}

}  // namespace gamedp
