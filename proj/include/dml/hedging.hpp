#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dml/instruments.hpp"
#include "dml/lsmc_poly.hpp"
#include "dml/market_sim.hpp"
#include "dml/twin_net.hpp"

namespace dml::hedge {

// A delta provider for the backtest: called once per (rebalance date, spot).
struct DeltaSource {
  std::string method;
  std::function<double(std::size_t date_index, double t, double tau, double spot)> delta;
};

DeltaSource analytic_source(const instruments::Instrument& inst, const market::MarketConfig& cfg);
DeltaSource zero_source();  // unhedged short option
// Dates before the first fitted regression fall back to the earliest fit
// (the spot there is the known initial state, so the time offset is one step).
DeltaSource poly_source(std::shared_ptr<const lsmc::PolyModel> model,
                        std::string method = "lsmc_poly");
DeltaSource net_source(std::shared_ptr<const net::NetParams> params, std::string method);

struct Histogram {
  double lo = -1.0, hi = 1.0;
  std::vector<std::uint64_t> counts;  // 61 bins; outliers clamp into the edge bins
};

struct HedgeReport {
  std::string method;
  std::size_t n_test_paths = 0;
  std::uint64_t seed = 0;
  double premium = 0.0;    // analytic value of the instrument at inception
  double rel_error = 0.0;  // population std of pnl_rel
  std::vector<double> pnl_rel;
  Histogram hist;
  std::vector<double> positions;  // n_paths x n_rebalance deltas when recorded
};

struct BacktestOptions {
  bool record_positions = false;
};

// Short the option at the analytic premium, rebalance at every grid date with
// the source's delta held over the following interval, mark at maturity:
//   PnL = V0 - X + sum_i delta_{t_{i-1}} (Z_{t_i} - Z_{t_{i-1}})
HedgeReport backtest(const DeltaSource& source, const market::MarketConfig& cfg,
                     const instruments::Instrument& inst, std::size_t n_test_paths,
                     std::uint64_t seed, const BacktestOptions& opt = {});
HedgeReport backtest_serial(const DeltaSource& source, const market::MarketConfig& cfg,
                            const instruments::Instrument& inst, std::size_t n_test_paths,
                            std::uint64_t seed, const BacktestOptions& opt = {});

// CSV dumps. pnl: path_id,pnl_rel   hist: bin_left,bin_right,count,method
void dump_pnl_csv(const HedgeReport& report, std::ostream& out);
void dump_hist_csv(const HedgeReport& report, std::ostream& out);

struct Table1Config {
  std::vector<std::size_t> sizes = {1000, 3000, 5000, 7000};
  int n_seeds = 5;
  int poly_degree = 5;
  net::TrainConfig net_cfg;  // lambda applies to diff_nn; lsmc_nn forces lambda = 0
  std::size_t n_test_paths = 10000;
  std::uint64_t root_seed = 0;
};

struct Table1Cell {
  std::vector<double> per_seed;
  double median = 0.0;
  std::string error;  // non-empty when the cell failed
};

struct Table1Result {
  std::vector<std::size_t> sizes;
  std::vector<std::string> methods;                     // lsmc_poly, lsmc_nn, diff_nn
  std::map<std::string, std::vector<Table1Cell>> cells;  // method -> per-size cells
  double analytic = 0.0;                                 // no training dependence
  std::uint64_t test_seed = 0;
  std::map<std::string, std::uint64_t> stage_seeds;
  // PnL distributions behind the histograms: largest size, first seed, plus analytic
  std::map<std::string, HedgeReport> figure_reports;
};

// The Table 1 experiment: all methods share the training batch of each
// (size, seed) cell and one common test batch. Per-cell failures are recorded
// and the grid keeps going.
Table1Result run_table1(const market::MarketConfig& cfg, const instruments::Instrument& inst,
                        const Table1Config& plan);

// One method cell: fit/train on the batch, backtest on the shared test batch.
double run_method_cell(const std::string& method, const market::PathBatch& train_batch,
                       const instruments::Instrument& inst, const Table1Config& plan,
                       std::uint64_t train_seed, std::uint64_t test_seed,
                       HedgeReport* report_out = nullptr);

}  // namespace dml::hedge
