#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "gamedp/converge.hpp"
#include "gamedp/solver.hpp"
#include "helpers.hpp"

using namespace gamedp;

namespace {

MertonParams desk_params() {
  MertonParams p;
  p.s0 = 1.0;
  p.sigma = 0.2;
  p.r = 0.06;
  p.lambda = 0.1;
  p.T = 1.0;
  p.jump_law = {{{std::log(0.8), 1.0}}};
  return p;
}

PayoffSpec russian_payoff(const MertonParams& p, double M = 1.2, double delta = 0.02) {
  PayoffSpec spec;
  spec.kind = PayoffKind::Russian;
  spec.M = M;
  spec.delta = delta;
  spec.r = p.r;
  return spec;
}

ConvergenceTable table_from(const std::vector<std::pair<int, double>>& rows) {
  ConvergenceTable table;
  for (auto [n, v] : rows) {
    ConvergenceRow row;
    row.n = n;
    row.value = v;
    row.engine = "exact";
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace

TEST_CASE("zero penalty collapses every row to max(M, s0)") {
  const MertonParams p = desk_params();
  const PayoffSpec spec = russian_payoff(p, 1.2, 0.0);
  const ConvergenceTable table = value_sequence(p, spec, {1, 2, 5, 8, 20});
  for (const auto& row : table.rows) {
    REQUIRE_FALSE(row.failed);
    CHECK(row.value == 1.2);
  }
  // the later deltas are exactly zero
  CHECK(table.rows.back().delta_prev == 0.0);
}

TEST_CASE("small sweeps reproduce the exact engine") {
  const MertonParams p = desk_params();
  const PayoffSpec spec = russian_payoff(p);
  EngineSelection exact;
  exact.kind = EngineSelection::Kind::Exact;
  const ConvergenceTable table = value_sequence(p, spec, {4, 8}, exact);
  for (const auto& row : table.rows) {
    REQUIRE_FALSE(row.failed);
    CHECK(row.engine == "exact");
    CHECK(row.value ==
          Catch::Approx(solve(build_exact(p, spec, row.n)).root_value).margin(0.0));
    CHECK(row.states > 0);
  }
  CHECK(table.rows[1].delta_prev ==
        std::abs(table.rows[1].value - table.rows[0].value));

  // diffusion-only game put variant
  MertonParams flat = p;
  flat.lambda = 0.0;
  flat.jump_law.atoms.clear();
  PayoffSpec put;
  put.kind = PayoffKind::GamePut;
  put.K = 1.1;
  put.delta = 0.05;
  put.r = flat.r;
  const ConvergenceTable puts = value_sequence(flat, put, {4, 8}, exact);
  for (const auto& row : puts.rows)
    CHECK(row.value == solve(build_exact(flat, put, row.n)).root_value);
}

TEST_CASE("every successful row sits between the root payoffs") {
  const MertonParams p = desk_params();
  const PayoffSpec spec = russian_payoff(p, 1.2, 0.1);
  const ConvergenceTable table = value_sequence(p, spec, {4, 8, 16, 32});
  const double psi_root = std::max(spec.M, p.s0);
  const double phi_root = psi_root + spec.delta * p.s0;
  for (const auto& row : table.rows) {
    REQUIRE_FALSE(row.failed);
    CHECK(row.value >= psi_root);
    CHECK(row.value <= phi_root + 1e-14);
  }
}

TEST_CASE("rows fail independently") {
  MertonParams p = desk_params();
  p.lambda = 2.0;
  p.jump_law = {{{0.0, 1.0}}};  // per-step jump probability 2/n
  const ConvergenceTable table = value_sequence(p, russian_payoff(p), {1, 4});
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].failed);
  CHECK_FALSE(table.rows[0].error.empty());
  CHECK_FALSE(table.rows[1].failed);
  CHECK(std::isnan(table.rows[0].value));
}

TEST_CASE("n_list validation") {
  const MertonParams p = desk_params();
  CHECK_THROWS_AS(value_sequence(p, russian_payoff(p), {}), ConfigError);
  CHECK_THROWS_AS(value_sequence(p, russian_payoff(p), {4, 4}), ConfigError);
  CHECK_THROWS_AS(value_sequence(p, russian_payoff(p), {0, 4}), ConfigError);
}

TEST_CASE("richardson extrapolation") {
  SECTION("constant sequences are exact") {
    const RichardsonResult res =
        richardson(table_from({{10, 1.2}, {20, 1.2}, {40, 1.2}}));
    CHECK(res.limit == 1.2);
    CHECK(res.exact);
    REQUIRE(res.ratios.size() == 1);
    CHECK_FALSE(res.ratios[0].ratio.has_value());
  }
  SECTION("geometric sequences extrapolate to the limit") {
    const double h = 0.25;
    const RichardsonResult res = richardson(
        table_from({{10, 1.0 + h}, {20, 1.0 + h / 2}, {40, 1.0 + h / 4}}));
    CHECK(res.limit == Catch::Approx(1.0).margin(1e-9));
    CHECK_FALSE(res.exact);
    REQUIRE(res.ratios.size() == 1);
    CHECK(*res.ratios[0].ratio == Catch::Approx(0.5).margin(1e-12));
  }
  SECTION("longer chains use the largest triple") {
    const RichardsonResult res = richardson(table_from(
        {{10, 2.0}, {20, 1.5}, {40, 1.25}, {80, 1.125}}));
    CHECK(res.limit == Catch::Approx(1.0).margin(1e-9));
    CHECK(res.ratios.size() == 2);
  }
  SECTION("insufficient rows") {
    CHECK_THROWS_AS(richardson(table_from({{10, 1.0}, {20, 1.0}})), InsufficientRows);
    CHECK_THROWS_AS(richardson(table_from({{3, 1.0}, {5, 1.0}, {9, 1.0}})),
                    InsufficientRows);
  }
}

TEST_CASE("game value is monotone in the penalty and the floor") {
  SplitMix64 rng = stream_rng(4242, RngDomain::ParamGen, 1);
  for (int trial = 0; trial < 20; ++trial) {
    MertonParams p = desk_params();
    p.sigma = 0.1 + rng.uniform() * 0.4;
    p.r = rng.uniform() * 0.1;
    const int n = 4 + static_cast<int>(rng.uniform() * 6);
    const double d1 = rng.uniform() * 0.05;
    const double d2 = d1 + rng.uniform() * 0.1;
    const double v1 = solve(build_exact(p, russian_payoff(p, 1.2, d1), n)).root_value;
    const double v2 = solve(build_exact(p, russian_payoff(p, 1.2, d2), n)).root_value;
    CHECK(v1 <= v2 + 1e-13);
    const double m1 = 1.0 + rng.uniform();
    const double m2 = m1 + rng.uniform();
    const double w1 = solve(build_exact(p, russian_payoff(p, m1, 0.02), n)).root_value;
    const double w2 = solve(build_exact(p, russian_payoff(p, m2, 0.02), n)).root_value;
    CHECK(w1 <= w2 + 1e-13);
  }
}

TEST_CASE("the american value caps the game value") {
  const MertonParams p = desk_params();
  const int n = 8;
  SECTION("any penalty keeps the game below the Snell envelope") {
    const FilteredLattice lat = build_exact(p, russian_payoff(p, 1.2, 0.02), n);
    CHECK(solve(lat).root_value <= testutil::snell_value(lat) + 1e-13);
  }
  SECTION("a prohibitive penalty recovers the american option") {
    const FilteredLattice lat = build_exact(p, russian_payoff(p, 1.2, 1e6), n);
    CHECK(solve(lat).root_value ==
          Catch::Approx(testutil::snell_value(lat)).margin(1e-12));
  }
}

TEST_CASE("grid gap bound vanishes with the interest rate") {
  MertonParams p = desk_params();
  p.r = 0.0;
  PayoffSpec spec = russian_payoff(p);
  spec.r = 0.0;
  McConfig cfg;
  cfg.n_paths = 2000;
  cfg.seed = 11;
  const GridGapBound b = grid_gap_bound(p, spec, 16, cfg);
  CHECK(b.term1 == 0.0);
  CHECK(b.term2 == 0.0);
  CHECK(b.term3_proxy > 0.0);
  CHECK(b.total == b.term3_proxy);
}

TEST_CASE("first two terms halve when n doubles in the diffusion model") {
  MertonParams p = desk_params();
  p.lambda = 0.0;
  p.jump_law.atoms.clear();
  const PayoffSpec spec = russian_payoff(p);
  McConfig cfg;
  cfg.n_paths = 100000;
  cfg.seed = 4;
  const GridGapBound b50 = grid_gap_bound(p, spec, 50, cfg);
  const GridGapBound b100 = grid_gap_bound(p, spec, 100, cfg);
  CHECK(b50.term1 / b100.term1 == Catch::Approx(2.0).epsilon(0.05));
  CHECK(b50.term2 / b100.term2 == Catch::Approx(2.0).epsilon(0.05));
}
