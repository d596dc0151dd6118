#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dml/hedging.hpp"
#include "dml/instruments.hpp"
#include "dml/market_sim.hpp"
#include "dml/twin_net.hpp"

namespace dml::cli {

inline constexpr const char* kVersion = "0.1.0";

// Flat dotted-key configuration; file values are overridden by --key value
// pairs, which are overridden by the named flags.
struct RunConfig {
  market::MarketConfig market;
  instruments::Instrument instrument{instruments::Kind::european_call, 110.0, 1.0};
  std::string method = "diff_nn";
  std::size_t paths = 7000;        // simulated / training paths for simulate|train|hedge
  std::size_t test_paths = 10000;  // backtest paths
  std::vector<std::size_t> train_sizes = {1000, 3000, 5000, 7000};
  int n_seeds = 5;
  int poly_degree = 5;
  net::TrainConfig net_cfg;
  std::uint64_t seed = 745;  // root seed; all stage seeds are labeled substreams of it
  std::filesystem::path out_dir = "out";

  void apply(const std::string& key, const std::string& value);
  std::map<std::string, std::string> echo() const;  // resolved key=value view
  void validate() const;
};

RunConfig load_config(const std::filesystem::path& file,
                      const std::vector<std::pair<std::string, std::string>>& overrides);
RunConfig config_from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs);

// Every command writes <out>/manifest.json twice: once with status "running"
// before any work, once finalized with output checksums and wall times.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config_echo;
  std::map<std::string, std::uint64_t> stage_seeds;
  std::map<std::string, double> wall_times_s;
  std::vector<std::pair<std::string, std::string>> outputs;  // filename -> fnv1a64 hex
  std::string status = "running";
  void write(const std::filesystem::path& dir) const;
};

int cmd_simulate(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_hedge(const RunConfig& cfg);
int cmd_table1(const RunConfig& cfg);

}  // namespace dml::cli
