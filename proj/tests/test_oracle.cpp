#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "gamedp/build.hpp"
#include "gamedp/oracle.hpp"
#include "gamedp/solver.hpp"
#include "helpers.hpp"

using namespace gamedp;

namespace {

FilteredLattice one_step_example() {
  FilteredLattice lat;
  lat.n_steps = 1;
  lat.time_index = {0, 1, 1};
  lat.lower = {1.0, 0.8, 1.6};
  lat.upper = {1.5, 0.8, 1.6};
  lat.edge_begin = {0, 2, 2, 2};
  lat.edge_child = {1, 2};
  lat.edge_prob = {0.5, 0.5};
  return lat;
}

StoppingRule rule_everywhere(const FilteredLattice& lat, bool stop_interior) {
  StoppingRule rule;
  rule.stop.assign(lat.size(), 0);
  for (std::uint32_t id = 0; id < lat.size(); ++id)
    rule.stop[id] = stop_interior || lat.is_terminal(id);
  return rule;
}

MertonParams crr_params() {
  MertonParams p;
  p.s0 = 1.0;
  p.sigma = 0.25;
  p.r = 0.05;
  p.lambda = 0.0;
  p.T = 1.0;
  return p;
}

PayoffSpec crr_put(const MertonParams& p) {
  PayoffSpec spec;
  spec.kind = PayoffKind::GamePut;
  spec.K = 1.1;
  spec.delta = 0.05;
  spec.r = p.r;
  return spec;
}

}  // namespace

TEST_CASE("enumeration agrees with the solver on the one-step example") {
  const FilteredLattice lat = one_step_example();
  const double v = solve(lat).root_value;
  for (Kernel kernel : {Kernel::H, Kernel::J}) {
    const GameValuePair pair = enumerate_game_value(lat, kernel);
    CHECK(pair.infsup == Catch::Approx(1.2).margin(1e-15));
    CHECK(pair.supinf == Catch::Approx(1.2).margin(1e-15));
    CHECK(pair.infsup == v);
  }
}

TEST_CASE("enumeration of a collapsed game returns the lower payoff") {
  FilteredLattice lat = one_step_example();
  lat.upper[0] = lat.lower[0];
  for (Kernel kernel : {Kernel::H, Kernel::J}) {
    const GameValuePair pair = enumerate_game_value(lat, kernel);
    CHECK(pair.infsup == 1.0);
    CHECK(pair.supinf == 1.0);
  }
}

TEST_CASE("enumeration with an unreachable upper payoff is the Snell value") {
  for (int trial = 0; trial < 25; ++trial) {
    SplitMix64 rng = stream_rng(6100, RngDomain::LatticeGen, trial);
    FilteredLattice lat = random_game_lattice(rng);
    for (std::uint32_t id = 0; id < lat.size(); ++id) lat.upper[id] = 1e100;
    const GameValuePair pair = enumerate_game_value(lat, Kernel::H);
    CHECK(pair.infsup == Catch::Approx(testutil::snell_value(lat)).margin(1e-12));
    CHECK(pair.supinf == Catch::Approx(pair.infsup).margin(1e-12));
  }
}

TEST_CASE("both orderings and both kernels agree with the solver exactly") {
  // Dyadic fixtures: probabilities and payoffs are small binary
  // fractions, so every expectation is exact in floating point and the
  // identities hold with zero tolerance.
  for (int trial = 0; trial < 200; ++trial) {
    SplitMix64 rng = stream_rng(6200, RngDomain::LatticeGen, trial);
    const FilteredLattice lat = random_game_lattice(rng);
    const double v = solve(lat).root_value;
    const GameValuePair h = enumerate_game_value(lat, Kernel::H);
    const GameValuePair j = enumerate_game_value(lat, Kernel::J);
    CHECK(h.infsup == h.supinf);
    CHECK(j.infsup == j.supinf);
    CHECK(h.infsup == j.infsup);
    CHECK(h.infsup == v);
  }
}

TEST_CASE("enumeration cap") {
  SplitMix64 rng = stream_rng(6300, RngDomain::LatticeGen, 0);
  const FilteredLattice lat = random_game_lattice(rng, 3, 3, 13);
  std::size_t interior = 0;
  for (std::uint32_t id = 0; id < lat.size(); ++id)
    if (!lat.is_terminal(id)) ++interior;
  if (interior > 5)
    CHECK_THROWS_AS(enumerate_game_value(lat, Kernel::H, 1ull << 10),
                    EnumerationCapExceeded);
}

TEST_CASE("constant payoff gives a zero-error estimate") {
  FilteredLattice lat = one_step_example();
  lat.upper[0] = lat.lower[0];  // delta = 0 at the root
  McConfig cfg;
  cfg.n_paths = 1000;
  cfg.seed = 7;
  const StoppingRule tau_root = rule_everywhere(lat, true);
  const StoppingRule sigma_terminal = rule_everywhere(lat, false);
  const McEstimate est = mc_price(lat, sigma_terminal, tau_root, Kernel::H, cfg);
  CHECK(est.mean == 1.0);
  CHECK(est.std_error == 0.0);
}

TEST_CASE("simulated play of the optimal rules reproduces the game value") {
  const MertonParams p = crr_params();
  const PayoffSpec spec = crr_put(p);
  const FilteredLattice lat = build_exact(p, spec, 8);
  const DPResult dp = solve(lat);
  const StrategyPair rules = extract_strategies(dp, lat);

  McConfig cfg;
  cfg.n_paths = 100000;
  cfg.seed = 20240915;
  const McEstimate est = mc_price(lat, rules.seller, rules.buyer, Kernel::H, cfg);
  CHECK(std::abs(est.mean - dp.root_value) <= 3.0 * est.std_error);
  CHECK(est.std_error > 0.0);
  CHECK(est.std_error < 0.01);
}

TEST_CASE("terminal mean is the initial price") {
  MertonParams p = crr_params();
  McConfig cfg;
  cfg.n_paths = 100000;
  cfg.seed = 99;
  SECTION("diffusion only") {
    const McEstimate est = mc_terminal_mean(p, 50, cfg);
    CHECK(std::abs(est.mean - p.s0) <= 3.0 * est.std_error);
  }
  SECTION("with jumps") {
    p.lambda = 0.5;
    p.jump_law = {{{std::log(0.7), 0.4}, {std::log(1.3), 0.6}}};
    const McEstimate est = mc_terminal_mean(p, 50, cfg);
    CHECK(std::abs(est.mean - p.s0) <= 3.0 * est.std_error);
  }
  SECTION("antithetic pairs") {
    cfg.antithetic = true;
    const McEstimate est = mc_terminal_mean(p, 50, cfg);
    CHECK(std::abs(est.mean - p.s0) <= 3.0 * est.std_error);
  }
}

TEST_CASE("fixed seeds reproduce bit for bit; fresh seeds stay consistent") {
  const MertonParams p = crr_params();
  const PayoffSpec spec = crr_put(p);
  const FilteredLattice lat = build_exact(p, spec, 6);
  const StrategyPair rules = extract_strategies(solve(lat), lat);

  McConfig cfg;
  cfg.n_paths = 20000;
  cfg.seed = 5;
  const McEstimate a = mc_price(lat, rules.seller, rules.buyer, Kernel::H, cfg);
  const McEstimate b = mc_price(lat, rules.seller, rules.buyer, Kernel::H, cfg);
  CHECK(a.mean == b.mean);
  CHECK(a.std_error == b.std_error);

  McConfig other = cfg;
  other.seed = 6;
  const McEstimate c = mc_price(lat, rules.seller, rules.buyer, Kernel::H, other);
  CHECK(std::abs(a.mean - c.mean) <= 3.0 * (a.std_error + c.std_error));
}

TEST_CASE("mc config validation") {
  McConfig cfg;
  cfg.n_paths = 50;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg.n_paths = 101;
  cfg.antithetic = true;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg.n_paths = 102;
  CHECK_NOTHROW(validate(cfg));
}

TEST_CASE("saddle check finds no profitable deviations") {
  const MertonParams p = crr_params();
  const PayoffSpec spec = crr_put(p);
  const FilteredLattice lat = build_exact(p, spec, 8);
  const DPResult dp = solve(lat);

  McConfig cfg;
  cfg.n_paths = 20000;
  cfg.seed = 31;
  const SaddleReport report = saddle_check(lat, dp, Kernel::H, cfg, 5);
  CHECK(report.violations == 0);
  CHECK(report.cases.size() == 10);
  for (const auto& c : report.cases) CHECK(c.ok);
}

TEST_CASE("saddle check on a collapsed game is constant") {
  FilteredLattice lat = one_step_example();
  lat.upper = lat.lower;
  const DPResult dp = solve(lat);
  McConfig cfg;
  cfg.n_paths = 2000;
  cfg.seed = 77;
  const SaddleReport report = saddle_check(lat, dp, Kernel::H, cfg, 4);
  CHECK(report.violations == 0);
  for (const auto& c : report.cases) {
    // every strategy pair pays psi(root) in a collapsed game
    CHECK(c.estimate == Catch::Approx(1.0).margin(1e-12));
  }
}
