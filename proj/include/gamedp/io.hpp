#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "gamedp/build.hpp"
#include "gamedp/converge.hpp"
#include "gamedp/errors.hpp"
#include "gamedp/graph.hpp"
#include "gamedp/model.hpp"
#include "gamedp/oracle.hpp"
#include "gamedp/payoff.hpp"

namespace gamedp {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Field helpers: every parse failure names the offending field.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string field_path(const std::string& ctx, const char* name) {
  return ctx.empty() ? std::string(name) : ctx + "." + name;
}

inline const json& require_field(const json& j, const std::string& ctx,
                                 const char* name) {
  if (!j.is_object())
    throw ConfigError((ctx.empty() ? std::string("config") : ctx) +
                      " must be a JSON object");
  auto it = j.find(name);
  if (it == j.end())
    throw ConfigError("missing required field: " + field_path(ctx, name));
  return *it;
}

inline double require_number(const json& j, const std::string& ctx, const char* name) {
  const json& f = require_field(j, ctx, name);
  if (!f.is_number())
    throw ConfigError(field_path(ctx, name) + " must be a number");
  return f.get<double>();
}

inline double optional_number(const json& j, const std::string& ctx,
                              const char* name, double fallback) {
  if (!j.is_object() || !j.contains(name)) return fallback;
  return require_number(j, ctx, name);
}

inline std::int64_t require_integer(const json& j, const std::string& ctx,
                                    const char* name) {
  const json& f = require_field(j, ctx, name);
  if (!f.is_number_integer())
    throw ConfigError(field_path(ctx, name) + " must be an integer");
  return f.get<std::int64_t>();
}

inline std::int64_t optional_integer(const json& j, const std::string& ctx,
                                     const char* name, std::int64_t fallback) {
  if (!j.is_object() || !j.contains(name)) return fallback;
  return require_integer(j, ctx, name);
}

inline std::string require_string(const json& j, const std::string& ctx,
                                  const char* name) {
  const json& f = require_field(j, ctx, name);
  if (!f.is_string())
    throw ConfigError(field_path(ctx, name) + " must be a string");
  return f.get<std::string>();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Model / payoff / config serialization
// ---------------------------------------------------------------------------

inline json to_json(const JumpLaw& law) {
  json atoms = json::array();
  for (const auto& atom : law.atoms) atoms.push_back({atom.log_mult, atom.prob});
  return {{"atoms", atoms}};
}

inline JumpLaw jump_law_from_json(const json& j, const std::string& ctx) {
  const json& atoms = detail::require_field(j, ctx, "atoms");
  if (!atoms.is_array())
    throw ConfigError(detail::field_path(ctx, "atoms") + " must be an array");
  JumpLaw law;
  for (const auto& entry : atoms) {
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number() ||
        !entry[1].is_number())
      throw ConfigError(detail::field_path(ctx, "atoms") +
                        " entries must be [log_multiplier, prob] pairs");
    law.atoms.push_back({entry[0].get<double>(), entry[1].get<double>()});
  }
  return law;
}

inline json to_json(const MertonParams& p) {
  json j{{"s0", p.s0}, {"sigma", p.sigma}, {"r", p.r},
         {"lambda", p.lambda}, {"T", p.T}};
  if (!p.jump_law.atoms.empty()) j["jump_law"] = to_json(p.jump_law);
  return j;
}

inline MertonParams model_from_json(const json& j, const std::string& ctx = "model") {
  MertonParams p;
  p.s0 = detail::require_number(j, ctx, "s0");
  p.sigma = detail::require_number(j, ctx, "sigma");
  p.r = detail::require_number(j, ctx, "r");
  p.lambda = detail::require_number(j, ctx, "lambda");
  p.T = detail::require_number(j, ctx, "T");
  if (j.contains("jump_law"))
    p.jump_law = jump_law_from_json(j["jump_law"], ctx + ".jump_law");
  validate(p);
  return p;
}

inline json to_json(const PayoffSpec& spec) {
  json j{{"kind", to_string(spec.kind)}, {"delta", spec.delta}};
  if (spec.kind == PayoffKind::Russian) j["M"] = spec.M;
  if (spec.kind == PayoffKind::GamePut || spec.kind == PayoffKind::GameCall)
    j["K"] = spec.K;
  return j;
}

// The rate is shared with the model; a payoff-level "r" is accepted but
// must agree when both are present.
inline PayoffSpec payoff_from_json(const json& j, double model_r,
                                   const std::string& ctx = "payoff") {
  PayoffSpec spec;
  const std::string kind = detail::require_string(j, ctx, "kind");
  if (kind == "russian") spec.kind = PayoffKind::Russian;
  else if (kind == "game_put") spec.kind = PayoffKind::GamePut;
  else if (kind == "game_call") spec.kind = PayoffKind::GameCall;
  else if (kind == "asian") spec.kind = PayoffKind::Asian;
  else
    throw ConfigError(detail::field_path(ctx, "kind") +
                      " must be one of russian|game_put|game_call|asian");
  spec.delta = detail::require_number(j, ctx, "delta");
  spec.r = detail::optional_number(j, ctx, "r", model_r);
  if (spec.r != model_r)
    throw ConfigError(detail::field_path(ctx, "r") +
                      " disagrees with model.r; omit it or match the model");
  if (spec.kind == PayoffKind::Russian) spec.M = detail::require_number(j, ctx, "M");
  if (spec.kind == PayoffKind::GamePut || spec.kind == PayoffKind::GameCall)
    spec.K = detail::require_number(j, ctx, "K");
  validate(spec);
  return spec;
}

inline json to_json(const McConfig& cfg) {
  return {{"n_paths", cfg.n_paths}, {"seed", cfg.seed}, {"antithetic", cfg.antithetic}};
}

inline McConfig mc_from_json(const json& j, const std::string& ctx = "mc") {
  McConfig cfg;
  cfg.n_paths = detail::optional_integer(j, ctx, "n_paths", cfg.n_paths);
  cfg.seed = static_cast<std::uint64_t>(detail::optional_integer(j, ctx, "seed", 0));
  if (j.is_object() && j.contains("antithetic")) {
    if (!j["antithetic"].is_boolean())
      throw ConfigError(detail::field_path(ctx, "antithetic") + " must be a boolean");
    cfg.antithetic = j["antithetic"].get<bool>();
  }
  validate(cfg);
  return cfg;
}

inline json to_json(const EngineSelection& sel) {
  switch (sel.kind) {
    case EngineSelection::Kind::Exact: return {{"kind", "exact"}};
    case EngineSelection::Kind::Quantized:
      return {{"kind", "quantized"}, {"q", sel.q}, {"eps_tail", sel.eps_tail}};
    default: return {{"kind", "auto"}, {"q", sel.q}, {"eps_tail", sel.eps_tail}};
  }
}

inline EngineSelection engine_from_json(const json& j, const std::string& ctx = "engine") {
  EngineSelection sel;
  const std::string kind = detail::require_string(j, ctx, "kind");
  if (kind == "auto") sel.kind = EngineSelection::Kind::Auto;
  else if (kind == "exact") sel.kind = EngineSelection::Kind::Exact;
  else if (kind == "quantized") sel.kind = EngineSelection::Kind::Quantized;
  else
    throw ConfigError(detail::field_path(ctx, "kind") +
                      " must be one of auto|exact|quantized");
  sel.q = static_cast<int>(detail::optional_integer(j, ctx, "q", sel.q));
  sel.eps_tail = detail::optional_number(j, ctx, "eps_tail", sel.eps_tail);
  if (sel.q < 1) throw ConfigError(detail::field_path(ctx, "q") + " must be >= 1");
  return sel;
}

// ---------------------------------------------------------------------------
// FilteredLattice serialization (explicit node ids)
// ---------------------------------------------------------------------------

inline json to_json(const FilteredLattice& lat) {
  json nodes = json::array();
  for (std::uint32_t id = 0; id < lat.size(); ++id) {
    json transitions = json::array();
    const auto kids = lat.children(id);
    const auto ps = lat.probs(id);
    for (std::size_t e = 0; e < kids.size(); ++e)
      transitions.push_back({kids[e], ps[e]});
    nodes.push_back({{"id", id},
                     {"k", lat.time_index[id]},
                     {"lower", lat.lower[id]},
                     {"upper", lat.upper[id]},
                     {"transitions", transitions}});
  }
  return {{"n_steps", lat.n_steps}, {"root", lat.root}, {"nodes", nodes}};
}

inline FilteredLattice lattice_from_json(const json& j,
                                         const std::string& ctx = "lattice") {
  FilteredLattice lat;
  lat.n_steps = static_cast<int>(detail::require_integer(j, ctx, "n_steps"));
  const std::int64_t root_id = detail::require_integer(j, ctx, "root");
  const json& nodes = detail::require_field(j, ctx, "nodes");
  if (!nodes.is_array() || nodes.empty())
    throw ConfigError(detail::field_path(ctx, "nodes") +
                      " must be a non-empty array");

  std::unordered_map<std::int64_t, std::uint32_t> index_of;
  index_of.reserve(nodes.size());
  for (const auto& node : nodes) {
    const std::int64_t id = detail::require_integer(node, ctx + ".nodes[]", "id");
    if (!index_of.emplace(id, static_cast<std::uint32_t>(index_of.size())).second)
      throw ConfigError(detail::field_path(ctx, "nodes") + ": duplicate id " +
                        std::to_string(id));
  }
  auto root_it = index_of.find(root_id);
  if (root_it == index_of.end())
    throw ConfigError(detail::field_path(ctx, "root") + " refers to an unknown node");
  lat.root = root_it->second;

  lat.edge_begin.push_back(0);
  for (const auto& node : nodes) {
    const std::string nctx = ctx + ".nodes[]";
    lat.time_index.push_back(
        static_cast<std::int32_t>(detail::require_integer(node, nctx, "k")));
    lat.lower.push_back(detail::require_number(node, nctx, "lower"));
    lat.upper.push_back(detail::require_number(node, nctx, "upper"));
    if (node.contains("transitions")) {
      const json& transitions = node["transitions"];
      if (!transitions.is_array())
        throw ConfigError(nctx + ".transitions must be an array");
      for (const auto& t : transitions) {
        if (!t.is_array() || t.size() != 2 || !t[0].is_number_integer() ||
            !t[1].is_number())
          throw ConfigError(nctx + ".transitions entries must be [child_id, prob]");
        auto it = index_of.find(t[0].get<std::int64_t>());
        if (it == index_of.end())
          throw ConfigError(nctx + ".transitions refers to unknown node id " +
                            std::to_string(t[0].get<std::int64_t>()));
        lat.edge_child.push_back(it->second);
        lat.edge_prob.push_back(t[1].get<double>());
      }
    }
    lat.edge_begin.push_back(lat.edge_child.size());
  }
  return lat;
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string command;  // price | converge | verify | bound
  MertonParams model;
  PayoffSpec payoff;
  std::vector<int> n_list;
  EngineSelection engine;
  BuildOptions build;
  McConfig mc;
  std::string out_csv;
  std::string out_json;
  bool bounds = false;
  bool timings = false;
  std::string tree_path;        // price: solve a serialized lattice instead
  std::string dump_tree_path;   // price: optional lattice dump
  std::uint64_t dump_guard = 200000;
  int verify_lattices = 200;
  int verify_deviations = 20;
  int verify_martingale_cases = 1000;
};

inline RunConfig parse_config(const json& j, const std::string& command) {
  RunConfig cfg;
  cfg.command = command;
  if (j.contains("command")) {
    const std::string in_file = detail::require_string(j, "", "command");
    if (in_file != command)
      throw ConfigError("command: config file says '" + in_file +
                        "' but the CLI invoked '" + command + "'");
  }

  const bool tree_mode = j.contains("tree");
  if (tree_mode) {
    if (command != "price")
      throw ConfigError("tree: only the price command accepts a lattice file");
    cfg.tree_path = detail::require_string(j, "", "tree");
  } else {
    cfg.model = model_from_json(detail::require_field(j, "", "model"));
    cfg.payoff = payoff_from_json(detail::require_field(j, "", "payoff"), cfg.model.r);
    if (command == "converge") {
      const json& ns = detail::require_field(j, "", "n_list");
      if (!ns.is_array() || ns.empty())
        throw ConfigError("n_list must be a non-empty array of integers");
      for (const auto& v : ns) {
        if (!v.is_number_integer())
          throw ConfigError("n_list must be a non-empty array of integers");
        cfg.n_list.push_back(v.get<int>());
      }
    } else {
      cfg.n_list.push_back(static_cast<int>(detail::require_integer(j, "", "n")));
    }
  }

  if (j.contains("engine")) cfg.engine = engine_from_json(j["engine"]);
  if (j.contains("engine") && j["engine"].contains("exact_step_cap"))
    cfg.build.exact_step_cap = static_cast<int>(
        detail::require_integer(j["engine"], "engine", "exact_step_cap"));
  if (j.contains("engine") && j["engine"].contains("max_states"))
    cfg.build.max_states = static_cast<std::size_t>(
        detail::require_integer(j["engine"], "engine", "max_states"));
  if (j.contains("engine") && j["engine"].contains("compat_normalization")) {
    const json& flag = j["engine"]["compat_normalization"];
    if (!flag.is_boolean())
      throw ConfigError("engine.compat_normalization must be a boolean");
    if (flag.get<bool>()) cfg.build.normalization = Normalization::Compat;
  }
  cfg.mc = j.contains("mc") ? mc_from_json(j["mc"]) : McConfig{};

  if (j.contains("output")) {
    const json& out = j["output"];
    if (out.is_string()) {
      if (out.get<std::string>() != "stdout")
        throw ConfigError("output must be \"stdout\" or an object with csv/json paths");
    } else if (out.is_object()) {
      if (out.contains("csv")) cfg.out_csv = detail::require_string(out, "output", "csv");
      if (out.contains("json"))
        cfg.out_json = detail::require_string(out, "output", "json");
    } else {
      throw ConfigError("output must be \"stdout\" or an object with csv/json paths");
    }
  }
  if (j.contains("bounds")) {
    if (!j["bounds"].is_boolean()) throw ConfigError("bounds must be a boolean");
    cfg.bounds = j["bounds"].get<bool>();
  }
  if (j.contains("timings")) {
    if (!j["timings"].is_boolean()) throw ConfigError("timings must be a boolean");
    cfg.timings = j["timings"].get<bool>();
  }
  if (j.contains("dump_tree"))
    cfg.dump_tree_path = detail::require_string(j, "", "dump_tree");
  cfg.dump_guard = static_cast<std::uint64_t>(
      detail::optional_integer(j, "", "dump_guard", cfg.dump_guard));
  if (j.contains("verify")) {
    const json& v = j["verify"];
    cfg.verify_lattices = static_cast<int>(
        detail::optional_integer(v, "verify", "lattices", cfg.verify_lattices));
    cfg.verify_deviations = static_cast<int>(
        detail::optional_integer(v, "verify", "deviations", cfg.verify_deviations));
    cfg.verify_martingale_cases = static_cast<int>(detail::optional_integer(
        v, "verify", "martingale_cases", cfg.verify_martingale_cases));
  }
  return cfg;
}

inline json config_echo(const RunConfig& cfg) {
  json j{{"command", cfg.command}};
  if (!cfg.tree_path.empty()) {
    j["tree"] = cfg.tree_path;
  } else {
    j["model"] = to_json(cfg.model);
    j["payoff"] = to_json(cfg.payoff);
    if (cfg.command == "converge") j["n_list"] = cfg.n_list;
    else j["n"] = cfg.n_list.empty() ? 0 : cfg.n_list.front();
  }
  j["engine"] = to_json(cfg.engine);
  j["mc"] = to_json(cfg.mc);
  if (cfg.bounds) j["bounds"] = true;
  if (cfg.timings) j["timings"] = true;
  return j;
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

// Shortest round-trip decimal representation; byte-stable across runs.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Frozen schema: n,value,delta_prev,engine,states,wall_ms plus the four
// bound columns when requested. wall_ms is emitted only when timings is
// set, keeping default output byte-identical across runs.
inline std::string to_csv(const ConvergenceTable& table, bool timings = false,
                          const std::vector<GridGapBound>* bounds = nullptr) {
  std::string out = "n,value,delta_prev,engine,states,wall_ms";
  if (bounds) out += ",term1,term2,term3_proxy,total";
  out += "\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    out += std::to_string(row.n);
    out += ",";
    out += row.failed ? "" : format_double(row.value);
    out += ",";
    out += format_double(row.delta_prev);
    out += ",";
    out += row.failed ? "failed" : row.engine;
    out += ",";
    out += std::to_string(row.states);
    out += ",";
    if (timings) out += format_double(row.wall_ms);
    if (bounds) {
      const auto& b = (*bounds)[i];
      out += "," + format_double(b.term1) + "," + format_double(b.term2) + "," +
             format_double(b.term3_proxy) + "," + format_double(b.total);
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Misc file helpers
// ---------------------------------------------------------------------------

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << content;
}

inline json parse_json_text(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError(what + ": invalid JSON");
  return j;
}

}  // namespace gamedp
