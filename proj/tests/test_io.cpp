#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>

#include "gamedp/cli.hpp"
#include "gamedp/io.hpp"
#include "gamedp/solver.hpp"

using namespace gamedp;

namespace {

json desk_config() {
  return json::parse(R"({
    "command": "price",
    "model": {
      "s0": 1.0, "sigma": 0.2, "r": 0.06, "lambda": 0.1, "T": 1.0,
      "jump_law": {"atoms": [[-0.2231435513142097, 1.0]]}
    },
    "payoff": {"kind": "russian", "M": 1.2, "delta": 0.02},
    "n": 10,
    "engine": {"kind": "exact"},
    "mc": {"n_paths": 1000, "seed": 42}
  })");
}

}  // namespace

TEST_CASE("model and payoff round-trip through JSON") {
  const RunConfig cfg = parse_config(desk_config(), "price");
  CHECK(cfg.model.sigma == 0.2);
  CHECK(cfg.model.jump_law.atoms.size() == 1);
  CHECK(cfg.payoff.kind == PayoffKind::Russian);
  CHECK(cfg.payoff.r == cfg.model.r);  // shared rate
  CHECK(cfg.n_list == std::vector<int>{10});
  CHECK(cfg.mc.seed == 42);

  const MertonParams reparsed = model_from_json(to_json(cfg.model));
  CHECK(reparsed.s0 == cfg.model.s0);
  CHECK(reparsed.jump_law.atoms[0].log_mult == cfg.model.jump_law.atoms[0].log_mult);
  const PayoffSpec payoff2 = payoff_from_json(to_json(cfg.payoff), cfg.model.r);
  CHECK(payoff2.kind == cfg.payoff.kind);
  CHECK(payoff2.M == cfg.payoff.M);
  CHECK(payoff2.delta == cfg.payoff.delta);
}

TEST_CASE("missing fields are reported by name") {
  json j = desk_config();
  j["model"].erase("sigma");
  try {
    parse_config(j, "price");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("sigma") != std::string::npos);
  }
}

TEST_CASE("config validation errors") {
  SECTION("command mismatch") {
    CHECK_THROWS_AS(parse_config(desk_config(), "converge"), ConfigError);
  }
  SECTION("payoff rate must match the model") {
    json j = desk_config();
    j["payoff"]["r"] = 0.01;
    CHECK_THROWS_AS(parse_config(j, "price"), ConfigError);
  }
  SECTION("converge needs n_list") {
    json j = desk_config();
    j["command"] = "converge";
    CHECK_THROWS_AS(parse_config(j, "converge"), ConfigError);
    j["n_list"] = json::array({4, 8});
    const RunConfig cfg = parse_config(j, "converge");
    CHECK(cfg.n_list == std::vector<int>{4, 8});
  }
  SECTION("unknown payoff kind") {
    json j = desk_config();
    j["payoff"]["kind"] = "lookback";
    CHECK_THROWS_AS(parse_config(j, "price"), ConfigError);
  }
  SECTION("bad engine kind") {
    json j = desk_config();
    j["engine"]["kind"] = "magic";
    CHECK_THROWS_AS(parse_config(j, "price"), ConfigError);
  }
  SECTION("compat normalization flag reaches the build options") {
    json j = desk_config();
    j["engine"]["compat_normalization"] = true;
    const RunConfig cfg = parse_config(j, "price");
    CHECK(cfg.build.normalization == Normalization::Compat);
    CHECK(parse_config(desk_config(), "price").build.normalization ==
          Normalization::ExactMartingale);
  }
}

TEST_CASE("lattices round-trip through JSON with arbitrary ids") {
  const json j = json::parse(R"({
    "n_steps": 1,
    "root": 30,
    "nodes": [
      {"id": 30, "k": 0, "lower": 1.0, "upper": 1.5,
       "transitions": [[10, 0.5], [20, 0.5]]},
      {"id": 10, "k": 1, "lower": 0.8, "upper": 0.8},
      {"id": 20, "k": 1, "lower": 1.6, "upper": 1.6, "transitions": []}
    ]
  })");
  const FilteredLattice lat = lattice_from_json(j);
  REQUIRE(lat.size() == 3);
  CHECK(solve(lat).root_value == Catch::Approx(1.2).margin(1e-15));

  const FilteredLattice again = lattice_from_json(to_json(lat));
  CHECK(solve(again).root_value == solve(lat).root_value);
  CHECK(again.time_index == lat.time_index);
  CHECK(again.lower == lat.lower);
  CHECK(again.edge_prob == lat.edge_prob);
}

TEST_CASE("lattice JSON errors name the problem") {
  json j = json::parse(R"({"n_steps": 1, "root": 5, "nodes": [
    {"id": 0, "k": 0, "lower": 1.0, "upper": 1.5, "transitions": []}]})");
  CHECK_THROWS_AS(lattice_from_json(j), ConfigError);
  j["root"] = 0;
  j["nodes"].push_back(j["nodes"][0]);
  CHECK_THROWS_AS(lattice_from_json(j), ConfigError);  // duplicate id
}

TEST_CASE("doubles format with shortest round-trip digits") {
  CHECK(format_double(1.2) == "1.2");
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(100.0) == "100");
  CHECK(format_double(std::nan("")) == "");
  const double v = 0.1 + 0.2;
  CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("csv schema is frozen") {
  ConvergenceTable table;
  ConvergenceRow a;
  a.n = 4;
  a.value = 1.2;
  a.engine = "exact";
  a.states = 35;
  a.wall_ms = 17.25;
  ConvergenceRow b;
  b.n = 8;
  b.value = 1.2;
  b.engine = "exact";
  b.states = 165;
  b.delta_prev = 0.0;
  table.rows = {a, b};

  CHECK(to_csv(table) ==
        "n,value,delta_prev,engine,states,wall_ms\n"
        "4,1.2,,exact,35,\n"
        "8,1.2,0,exact,165,\n");
  // timings are opt-in so default output is reproducible byte for byte
  CHECK(to_csv(table, true) ==
        "n,value,delta_prev,engine,states,wall_ms\n"
        "4,1.2,,exact,35,17.25\n"
        "8,1.2,0,exact,165,0\n");

  ConvergenceRow failed;
  failed.n = 2;
  failed.failed = true;
  failed.error = "too coarse";
  table.rows = {failed};
  CHECK(to_csv(table) ==
        "n,value,delta_prev,engine,states,wall_ms\n"
        "2,,,failed,0,\n");
}

TEST_CASE("exit codes map error families") {
  CHECK(exit_code_for(ConfigError("x")) == 1);
  CHECK(exit_code_for(StepTooCoarse("x", 4)) == 1);
  CHECK(exit_code_for(MalformedLattice("x")) == 1);
  CHECK(exit_code_for(ExactCapExceeded("x")) == 2);
  CHECK(exit_code_for(GridOverflow("x", 10)) == 2);
  CHECK(exit_code_for(EnumerationCapExceeded("x")) == 2);
}
