#include <cstdint>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "dml/cli_runner.hpp"

namespace {

// leftover "--dotted.key value" tokens become config overrides
std::vector<std::pair<std::string, std::string>> parse_extras(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.size() <= 2)
      throw CLI::ValidationError("expected --key value pairs, got '" + tok + "'");
    if (i + 1 >= extras.size())
      throw CLI::ValidationError("missing value for override '" + tok + "'");
    out.emplace_back(tok.substr(2), extras[++i]);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differential machine learning for pricing and delta hedging"};
  app.require_subcommand(1);

  std::string config_path, out_dir, method;
  std::uint64_t seed = 0;
  std::uint64_t paths = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value configuration file");
    sub->add_option("--seed", seed, "root seed for all labeled substreams");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--paths", paths, "simulated / training path count");
    sub->allow_extras();
    return sub;
  };

  auto* sim = add_common(app.add_subcommand("simulate", "simulate paths and dump them as CSV"));
  auto* train = add_common(app.add_subcommand("train", "fit one method and dump model + curves"));
  train->add_option("--method", method, "lsmc_poly | lsmc_nn | diff_nn");
  auto* hedgecmd = add_common(app.add_subcommand("hedge", "train one method and run the backtest"));
  hedgecmd->add_option("--method", method, "analytic | lsmc_poly | lsmc_nn | diff_nn");
  auto* table = add_common(app.add_subcommand("table1", "full methods x training-sizes grid"));

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    auto extras = sub->remaining();
    auto overrides = parse_extras(extras);
    dml::cli::RunConfig cfg = dml::cli::load_config(config_path, overrides);
    if (sub->count("--seed") > 0) cfg.seed = seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!method.empty()) cfg.method = method;
    if (paths > 0) cfg.paths = static_cast<std::size_t>(paths);

    if (sub == sim) return dml::cli::cmd_simulate(cfg);
    if (sub == train) return dml::cli::cmd_train(cfg);
    if (sub == hedgecmd) return dml::cli::cmd_hedge(cfg);
    if (sub == table) return dml::cli::cmd_table1(cfg);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
