#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "gamedp/cli.hpp"
#include "gamedp/io.hpp"
#include "gamedp/version.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::string tree_path;
  std::string out_path;
  std::string engine;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int quant_q = 0;
  double eps_tail = 0.0;
};

void apply_overrides(gamedp::RunConfig& cfg, const CliArgs& args) {
  if (args.seed_given) cfg.mc.seed = args.seed;
  if (!args.engine.empty()) {
    if (args.engine == "auto") cfg.engine.kind = gamedp::EngineSelection::Kind::Auto;
    else if (args.engine == "exact")
      cfg.engine.kind = gamedp::EngineSelection::Kind::Exact;
    else if (args.engine == "quantized")
      cfg.engine.kind = gamedp::EngineSelection::Kind::Quantized;
    else
      throw gamedp::ConfigError("--engine must be one of auto|exact|quantized");
  }
  if (args.quant_q > 0) cfg.engine.q = args.quant_q;
  if (args.eps_tail > 0.0) cfg.engine.eps_tail = args.eps_tail;
  if (!args.out_path.empty()) {
    const bool csv = args.out_path.size() > 4 &&
                     args.out_path.substr(args.out_path.size() - 4) == ".csv";
    if (csv) cfg.out_csv = args.out_path;
    else cfg.out_json = args.out_path;
  }
}

int dispatch(const std::string& command, const CliArgs& args) {
  gamedp::json config_json = gamedp::json::object();
  if (!args.config_path.empty())
    config_json = gamedp::parse_json_text(gamedp::read_file(args.config_path), "config");
  else if (args.tree_path.empty())
    throw gamedp::ConfigError("--config is required (except for price --tree)");
  if (!args.tree_path.empty()) config_json["tree"] = args.tree_path;

  gamedp::RunConfig cfg = gamedp::parse_config(config_json, command);
  apply_overrides(cfg, args);
  return gamedp::run(cfg, std::cout, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Game-option pricing on filtered lattices"};
  app.set_version_flag("--version", std::string(gamedp::kVersion));
  app.require_subcommand(1);

  CliArgs args;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", args.config_path, "JSON run configuration");
    cmd->add_option("--seed", args.seed, "override mc.seed")
        ->each([&](const std::string&) { args.seed_given = true; });
    cmd->add_option("--engine", args.engine, "auto|exact|quantized");
    cmd->add_option("--q", args.quant_q, "quantization factor override");
    cmd->add_option("--eps-tail", args.eps_tail, "jump tail mass override");
    cmd->add_option("--out", args.out_path,
                    "output path (.csv for tables, JSON otherwise)");
  };

  CLI::App* price = app.add_subcommand("price", "single game value with stop regions");
  price->add_option("--tree", args.tree_path, "price a serialized lattice JSON");
  add_common(price);
  CLI::App* converge = app.add_subcommand("converge", "value sequence over n_list");
  add_common(converge);
  CLI::App* verify = app.add_subcommand("verify", "oracle and martingale checks");
  add_common(verify);
  CLI::App* bound = app.add_subcommand("bound", "grid-gap diagnostic terms");
  add_common(bound);

  CLI11_PARSE(app, argc, argv);

  const std::string command = price->parsed()      ? "price"
                              : converge->parsed() ? "converge"
                              : verify->parsed()   ? "verify"
                                                   : "bound";
  try {
    return dispatch(command, args);
  } catch (const gamedp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return gamedp::exit_code_for(e);
  }
}
