#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "gamedp/converge.hpp"
#include "gamedp/io.hpp"
#include "gamedp/oracle.hpp"
#include "gamedp/solver.hpp"
#include "gamedp/version.hpp"

namespace gamedp {

// Exit codes: 0 ok, 1 config error, 2 engine capacity, 3 verification
// failure (verify command only).
inline int exit_code_for(const Error& e) {
  if (dynamic_cast<const ExactCapExceeded*>(&e) ||
      dynamic_cast<const GridOverflow*>(&e) ||
      dynamic_cast<const EnumerationCapExceeded*>(&e))
    return 2;
  return 1;
}

namespace detail {

inline json report_header(const RunConfig& cfg) {
  return {{"artifact_version", kVersion},
          {"command", cfg.command},
          {"seed", cfg.mc.seed},
          {"config", config_echo(cfg)}};
}

inline json stop_region_summary(const FilteredLattice& lat, const DPResult& dp) {
  std::uint64_t buyer = 0, seller = 0;
  int earliest_buyer = -1, earliest_seller = -1;
  for (std::uint32_t id = 0; id < lat.size(); ++id) {
    if (lat.is_terminal(id)) continue;
    const int k = lat.time_index[id];
    if (dp.buyer_stop[id]) {
      ++buyer;
      if (earliest_buyer < 0 || k < earliest_buyer) earliest_buyer = k;
    }
    if (dp.seller_cancel[id]) {
      ++seller;
      if (earliest_seller < 0 || k < earliest_seller) earliest_seller = k;
    }
  }
  json out{{"buyer_stop_nodes", buyer}, {"seller_cancel_nodes", seller}};
  if (earliest_buyer >= 0) out["earliest_buyer_k"] = earliest_buyer;
  if (earliest_seller >= 0) out["earliest_seller_k"] = earliest_seller;
  return out;
}

inline json grid_meta(const QuantGrid& grid) {
  return {{"q", grid.q},
          {"h", grid.h},
          {"eps_tail", grid.eps_tail},
          {"j_max", grid.j_max},
          {"tail_mass", grid.tail_mass},
          {"jump_residuals", grid.residuals}};
}

inline void emit(const RunConfig& cfg, const std::string& text, std::ostream& console) {
  if (!cfg.out_json.empty()) write_file(cfg.out_json, text);
  else console << text;
}

// ---------------------------------------------------------------------------

inline int run_price(const RunConfig& cfg, std::ostream& console) {
  FilteredLattice lattice;
  std::string engine;
  json engine_meta;
  int n = 0;
  if (!cfg.tree_path.empty()) {
    lattice = lattice_from_json(parse_json_text(read_file(cfg.tree_path), "tree"));
    engine = "tree";
    n = lattice.n_steps;
  } else {
    BuiltLattice built = build_with_selection(cfg.model, cfg.payoff,
                                              cfg.n_list.front(), cfg.engine, cfg.build);
    lattice = std::move(built.lattice);
    engine = built.engine;
    if (built.grid) engine_meta = grid_meta(*built.grid);
    n = cfg.n_list.front();
  }
  const DPResult dp = solve(lattice);

  if (!cfg.dump_tree_path.empty()) {
    if (lattice.size() > cfg.dump_guard)
      throw GridOverflow("lattice dump refused: " + std::to_string(lattice.size()) +
                             " nodes exceed dump_guard=" + std::to_string(cfg.dump_guard),
                         lattice.size());
    write_file(cfg.dump_tree_path, to_json(lattice).dump(2) + "\n");
  }

  json report = report_header(cfg);
  report["n"] = n;
  report["engine"] = {{"kind", engine}, {"states", lattice.size()}};
  if (!engine_meta.is_null()) report["engine"]["grid"] = engine_meta;
  report["value"] = dp.root_value;
  report["stop_region"] = stop_region_summary(lattice, dp);
  emit(cfg, report.dump(2) + "\n", console);
  return 0;
}

inline int run_converge(const RunConfig& cfg, std::ostream& console) {
  const ConvergenceTable table =
      value_sequence(cfg.model, cfg.payoff, cfg.n_list, cfg.engine, cfg.build);

  std::vector<GridGapBound> bounds;
  if (cfg.bounds) {
    for (const auto& row : table.rows) {
      if (row.failed) bounds.push_back({});
      else bounds.push_back(grid_gap_bound(cfg.model, cfg.payoff, row.n, cfg.mc,
                                           cfg.build.normalization));
    }
  }

  const std::string csv = to_csv(table, cfg.timings, cfg.bounds ? &bounds : nullptr);
  if (!cfg.out_csv.empty()) write_file(cfg.out_csv, csv);
  else console << csv;

  if (!cfg.out_json.empty()) {
    json rows = json::array();
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const auto& row = table.rows[i];
      json r{{"n", row.n}, {"states", row.states}};
      if (row.failed) r["error"] = row.error;
      else {
        r["value"] = row.value;
        r["engine"] = row.engine;
        if (!std::isnan(row.delta_prev)) r["delta_prev"] = row.delta_prev;
        if (row.grid) r["grid"] = grid_meta(*row.grid);
      }
      if (cfg.timings) r["wall_ms"] = row.wall_ms;
      if (cfg.bounds && !row.failed)
        r["bound"] = {{"term1", bounds[i].term1},
                      {"term2", bounds[i].term2},
                      {"term3_proxy", bounds[i].term3_proxy},
                      {"total", bounds[i].total}};
      rows.push_back(r);
    }
    json report = report_header(cfg);
    report["rows"] = rows;
    try {
      const RichardsonResult rich = richardson(table);
      json ratios = json::array();
      for (const auto& entry : rich.ratios) {
        json e{{"n", entry.n}};
        if (entry.ratio) e["ratio"] = *entry.ratio;
        else e["ratio"] = "exact";
        ratios.push_back(e);
      }
      report["richardson"] = {{"limit", rich.limit}, {"exact", rich.exact},
                              {"ratios", ratios}};
    } catch (const InsufficientRows&) {
      // fewer than three doubling rows; omit the extrapolation block
    }
    write_file(cfg.out_json, report.dump(2) + "\n");
  }
  return 0;
}

inline int run_bound(const RunConfig& cfg, std::ostream& console) {
  const GridGapBound b = grid_gap_bound(cfg.model, cfg.payoff, cfg.n_list.front(),
                                        cfg.mc, cfg.build.normalization);
  json report = report_header(cfg);
  report["n"] = cfg.n_list.front();
  report["bound"] = {{"term1", b.term1},
                     {"term2", b.term2},
                     {"term3_proxy", b.term3_proxy},
                     {"total", b.total},
                     {"term3_is_heuristic", true},
                     {"e_sup_accrued", b.e_sup_accrued},
                     {"se_sup_accrued", b.se_sup_accrued},
                     {"e_sup", b.e_sup},
                     {"se_sup", b.se_sup},
                     {"max_mean_increment", b.max_mean_increment}};
  emit(cfg, report.dump(2) + "\n", console);
  return 0;
}

// ---------------------------------------------------------------------------
// verify: oracle equivalence + martingale identity + MC terminal mean +
// saddle check, one command to gate CI.
// ---------------------------------------------------------------------------

struct VerifyCheck {
  std::string name;
  bool passed = false;
  json details;
};

inline VerifyCheck check_oracle_equivalence(const RunConfig& cfg) {
  VerifyCheck check{"oracle_equivalence", true, {}};
  double worst = 0.0;
  for (int i = 0; i < cfg.verify_lattices; ++i) {
    SplitMix64 rng = stream_rng(cfg.mc.seed, RngDomain::LatticeGen, i);
    const FilteredLattice lat = random_game_lattice(rng);
    const double v = solve(lat).root_value;
    for (Kernel kernel : {Kernel::H, Kernel::J}) {
      const GameValuePair pair = enumerate_game_value(lat, kernel);
      worst = std::max({worst, std::abs(pair.infsup - pair.supinf),
                        std::abs(pair.infsup - v)});
    }
  }
  check.passed = worst <= 1e-12;
  check.details = {{"lattices", cfg.verify_lattices}, {"max_deviation", worst}};
  return check;
}

inline VerifyCheck check_martingale_identity(const RunConfig& cfg) {
  VerifyCheck check{"martingale_identity", true, {}};
  double worst = 0.0;
  for (int i = 0; i < cfg.verify_martingale_cases; ++i) {
    SplitMix64 rng = stream_rng(cfg.mc.seed, RngDomain::ParamGen, i);
    const MertonParams params = random_merton_params(rng);
    int n = 1 + static_cast<int>(rng.uniform() * 400);
    StepParams step;
    try {
      step = step_params(params, n);
    } catch (const StepTooCoarse& e) {
      n = e.min_valid_n;
      step = step_params(params, n);
    }
    worst = std::max(worst,
                     std::abs(one_step_mean_factor(step, params.jump_law) - 1.0));
  }
  check.passed = worst <= 1e-12;
  check.details = {{"cases", cfg.verify_martingale_cases}, {"max_deviation", worst}};
  return check;
}

inline VerifyCheck check_terminal_mean(const RunConfig& cfg) {
  VerifyCheck check{"mc_terminal_mean", true, {}};
  const int n = cfg.n_list.front();
  const McEstimate est = mc_terminal_mean(cfg.model, n, cfg.mc);
  const double gap = std::abs(est.mean - cfg.model.s0);
  check.passed = gap <= 3.0 * est.std_error;
  check.details = {{"n", n},
                   {"estimate", est.mean},
                   {"std_error", est.std_error},
                   {"target", cfg.model.s0}};
  return check;
}

inline VerifyCheck check_saddle(const RunConfig& cfg) {
  VerifyCheck check{"saddle_check", true, {}};
  const BuiltLattice built = build_with_selection(cfg.model, cfg.payoff,
                                                  cfg.n_list.front(), cfg.engine,
                                                  cfg.build);
  const DPResult dp = solve(built.lattice);
  const SaddleReport report =
      saddle_check(built.lattice, dp, Kernel::H, cfg.mc, cfg.verify_deviations);
  check.passed = report.violations == 0;
  json cases = json::array();
  for (const auto& c : report.cases)
    cases.push_back({{"side", c.buyer_deviation ? "buyer" : "seller"},
                     {"index", c.index},
                     {"estimate", c.estimate},
                     {"std_error", c.std_error},
                     {"ok", c.ok}});
  check.details = {{"root_value", report.root_value},
                   {"deviations_per_side", cfg.verify_deviations},
                   {"violations", report.violations},
                   {"cases", cases}};
  return check;
}

inline int run_verify(const RunConfig& cfg, std::ostream& console) {
  std::vector<VerifyCheck> checks;
  checks.push_back(check_oracle_equivalence(cfg));
  checks.push_back(check_martingale_identity(cfg));
  checks.push_back(check_terminal_mean(cfg));
  checks.push_back(check_saddle(cfg));

  bool all_passed = true;
  json report = report_header(cfg);
  json entries = json::array();
  for (const auto& check : checks) {
    all_passed = all_passed && check.passed;
    entries.push_back({{"name", check.name},
                       {"passed", check.passed},
                       {"details", check.details}});
  }
  report["checks"] = entries;
  report["passed"] = all_passed;
  emit(cfg, report.dump(2) + "\n", console);
  return all_passed ? 0 : 3;
}

}  // namespace detail

// Dispatches a parsed run configuration; returns the process exit code
// and writes the requested artifacts.
inline int run(const RunConfig& cfg, std::ostream& console, std::ostream& errors) {
  try {
    if (cfg.command == "price") return detail::run_price(cfg, console);
    if (cfg.command == "converge") return detail::run_converge(cfg, console);
    if (cfg.command == "bound") return detail::run_bound(cfg, console);
    if (cfg.command == "verify") return detail::run_verify(cfg, console);
    throw ConfigError("command must be one of price|converge|verify|bound");
  } catch (const Error& e) {
    errors << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace gamedp
