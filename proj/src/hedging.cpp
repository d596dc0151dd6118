#include "dml/hedging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dml/analytic.hpp"
#include "dml/io.hpp"
#include "dml/reduce.hpp"
#include "dml/rng.hpp"

namespace dml::hedge {

namespace {

double analytic_premium(const instruments::Instrument& inst, const market::MarketConfig& cfg) {
  if (inst.kind == instruments::Kind::european_call)
    return analytic::bs_call(cfg.s0, inst.strike, cfg.sigma, inst.maturity, cfg.r).price;
  return analytic::bs_digital(cfg.s0, inst.strike, cfg.sigma, inst.maturity, cfg.r).price;
}

}  // namespace

DeltaSource analytic_source(const instruments::Instrument& inst, const market::MarketConfig& cfg) {
  const double sigma = cfg.sigma;
  const double r = cfg.r;
  const auto kind = inst.kind;
  const double strike = inst.strike;
  return {"analytic", [=](std::size_t, double, double tau, double spot) {
            if (kind == instruments::Kind::european_call)
              return analytic::bs_call(spot, strike, sigma, tau, r).delta;
            return analytic::bs_digital(spot, strike, sigma, tau, r).delta;
          }};
}

DeltaSource zero_source() {
  return {"zero", [](std::size_t, double, double, double) { return 0.0; }};
}

DeltaSource poly_source(std::shared_ptr<const lsmc::PolyModel> model, std::string method) {
  if (!model || model->fits.empty())
    throw std::invalid_argument("poly_source: model has no fitted dates");
  const std::uint32_t first = model->fits.front().date_index;
  return {std::move(method), [model, first](std::size_t date, double, double, double spot) {
            const auto idx = static_cast<std::uint32_t>(date);
            return lsmc::poly_delta(*model, idx < first ? first : idx, spot);
          }};
}

DeltaSource net_source(std::shared_ptr<const net::NetParams> params, std::string method) {
  if (!params) throw std::invalid_argument("net_source: null params");
  return {std::move(method), [params](std::size_t, double, double tau, double spot) {
            static thread_local net::Workspace ws;
            return net::predict(*params, spot, tau, ws).dy_dz;
          }};
}

namespace {

HedgeReport backtest_impl(const DeltaSource& source, const market::MarketConfig& cfg,
                          const instruments::Instrument& inst, std::size_t n_test_paths,
                          std::uint64_t seed, const BacktestOptions& opt, bool parallel) {
  inst.validate();
  if (std::abs(inst.maturity - cfg.maturity) > 1e-12)
    throw std::invalid_argument("backtest: instrument and market maturities differ");
  if (!source.delta) throw std::invalid_argument("backtest: delta source is empty");

  const market::PathBatch batch = parallel ? market::simulate(cfg, n_test_paths, seed)
                                           : market::simulate_serial(cfg, n_test_paths, seed);
  const double premium = analytic_premium(inst, cfg);
  if (!(premium > 0.0))
    throw std::invalid_argument("backtest: option premium is not positive, relative PnL undefined");

  HedgeReport report;
  report.method = source.method;
  report.n_test_paths = n_test_paths;
  report.seed = seed;
  report.premium = premium;
  report.pnl_rel.resize(n_test_paths);
  const std::size_t n_dates = batch.n_steps();  // rebalance at grid points 0..n-1
  if (opt.record_positions) report.positions.resize(n_test_paths * n_dates);

  std::vector<std::string> errors(parallel ? 64 : 1);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(n_test_paths); ++pi) {
    const auto i = static_cast<std::size_t>(pi);
    try {
      double pnl = premium - instruments::payoff(inst, batch.terminal(i));
      for (std::size_t d = 0; d < n_dates; ++d) {
        const double t = batch.grid[d];
        const double tau = cfg.maturity - t;
        const double spot = batch.spot(i, d);
        const double delta = source.delta(d, t, tau, spot);
        if (!std::isfinite(delta))
          throw std::runtime_error("non-finite delta from method '" + source.method +
                                   "' at date index " + std::to_string(d));
        if (opt.record_positions) report.positions[i * n_dates + d] = delta;
        pnl += delta * (batch.spot(i, d + 1) - spot);
      }
      report.pnl_rel[i] = pnl / premium;
    } catch (const std::exception& e) {
#ifdef _OPENMP
      errors[static_cast<std::size_t>(omp_get_thread_num()) % errors.size()] = e.what();
#else
      errors[0] = e.what();
#endif
    }
  }
  for (const auto& err : errors)
    if (!err.empty()) throw std::runtime_error("backtest: " + err);

  report.rel_error = std::sqrt(reduce::mean_var(report.pnl_rel).var);

  report.hist.counts.assign(61, 0);
  const double width = (report.hist.hi - report.hist.lo) / 61.0;
  for (double v : report.pnl_rel) {
    auto bin = static_cast<std::ptrdiff_t>(std::floor((v - report.hist.lo) / width));
    bin = std::clamp<std::ptrdiff_t>(bin, 0, 60);
    ++report.hist.counts[static_cast<std::size_t>(bin)];
  }
  return report;
}

}  // namespace

HedgeReport backtest(const DeltaSource& source, const market::MarketConfig& cfg,
                     const instruments::Instrument& inst, std::size_t n_test_paths,
                     std::uint64_t seed, const BacktestOptions& opt) {
  return backtest_impl(source, cfg, inst, n_test_paths, seed, opt, true);
}

HedgeReport backtest_serial(const DeltaSource& source, const market::MarketConfig& cfg,
                            const instruments::Instrument& inst, std::size_t n_test_paths,
                            std::uint64_t seed, const BacktestOptions& opt) {
  return backtest_impl(source, cfg, inst, n_test_paths, seed, opt, false);
}

void dump_pnl_csv(const HedgeReport& report, std::ostream& out) {
  out << "path_id,pnl_rel\n";
  for (std::size_t i = 0; i < report.pnl_rel.size(); ++i)
    out << i << ',' << io::fmt(report.pnl_rel[i]) << '\n';
}

void dump_hist_csv(const HedgeReport& report, std::ostream& out) {
  out << "bin_left,bin_right,count,method\n";
  const double width = (report.hist.hi - report.hist.lo) / static_cast<double>(report.hist.counts.size());
  for (std::size_t b = 0; b < report.hist.counts.size(); ++b)
    out << io::fmt(report.hist.lo + width * static_cast<double>(b)) << ','
        << io::fmt(report.hist.lo + width * static_cast<double>(b + 1)) << ','
        << report.hist.counts[b] << ',' << report.method << '\n';
}

double run_method_cell(const std::string& method, const market::PathBatch& train_batch,
                       const instruments::Instrument& inst, const Table1Config& plan,
                       std::uint64_t train_seed, std::uint64_t test_seed,
                       HedgeReport* report_out) {
  const market::MarketConfig& cfg = train_batch.cfg;
  const std::size_t n_steps = train_batch.n_steps();
  DeltaSource source;

  if (method == "lsmc_poly") {
    // one regression per future rebalance date; t_0 has a degenerate state
    std::vector<std::size_t> dates;
    for (std::size_t d = 1; d < n_steps; ++d) dates.push_back(d);
    const auto ts = instruments::build_training_set(train_batch, inst,
                                                    instruments::SampleMode::per_date, dates,
                                                    train_seed);
    auto model = std::make_shared<lsmc::PolyModel>(lsmc::fit_poly(ts, plan.poly_degree));
    source = poly_source(std::move(model));
  } else if (method == "lsmc_nn" || method == "diff_nn") {
    std::vector<std::size_t> dates(n_steps);
    for (std::size_t d = 0; d < n_steps; ++d) dates[d] = d;
    const auto ts = instruments::build_training_set(train_batch, inst,
                                                    instruments::SampleMode::time_feature, dates,
                                                    train_seed);
    net::TrainConfig tc = plan.net_cfg;
    tc.seed = train_seed;
    if (method == "lsmc_nn") tc.lambda = 0.0;
    auto params = std::make_shared<net::NetParams>(net::train(ts, tc).params);
    source = net_source(std::move(params), method);
  } else if (method == "analytic") {
    source = analytic_source(inst, cfg);
  } else {
    throw std::invalid_argument("unknown method: " + method);
  }

  const HedgeReport report = backtest(source, cfg, inst, plan.n_test_paths, test_seed);
  if (report_out != nullptr) *report_out = report;
  return report.rel_error;
}

Table1Result run_table1(const market::MarketConfig& cfg, const instruments::Instrument& inst,
                        const Table1Config& plan) {
  if (plan.sizes.empty() || plan.n_seeds < 1)
    throw std::invalid_argument("run_table1: empty plan");

  Table1Result result;
  result.sizes = plan.sizes;
  result.methods = {"lsmc_poly", "lsmc_nn", "diff_nn"};
  result.test_seed = rng::label_seed(plan.root_seed, "sim.test");
  result.stage_seeds["sim.test"] = result.test_seed;

  {
    const DeltaSource bs = analytic_source(inst, cfg);
    HedgeReport report = backtest(bs, cfg, inst, plan.n_test_paths, result.test_seed);
    result.analytic = report.rel_error;
    result.figure_reports["analytic"] = std::move(report);
  }

  for (const auto& method : result.methods)
    result.cells[method].resize(plan.sizes.size());

  for (std::size_t si = 0; si < plan.sizes.size(); ++si) {
    const std::size_t size = plan.sizes[si];
    for (int k = 0; k < plan.n_seeds; ++k) {
      const std::string sim_label = "sim.train." + std::to_string(size) + ".s" + std::to_string(k);
      const std::uint64_t sim_seed = rng::label_seed(plan.root_seed, sim_label);
      result.stage_seeds[sim_label] = sim_seed;
      if (sim_seed == result.test_seed)
        throw std::runtime_error("run_table1: training seed collides with the test seed");
      const market::PathBatch batch =
          market::propagate_tangents(market::simulate(cfg, size, sim_seed));

      for (const auto& method : result.methods) {
        const std::string train_label =
            "train." + method + "." + std::to_string(size) + ".s" + std::to_string(k);
        const std::uint64_t train_seed = rng::label_seed(plan.root_seed, train_label);
        result.stage_seeds[train_label] = train_seed;
        Table1Cell& cell = result.cells[method][si];
        const bool keep_report = si + 1 == plan.sizes.size() && k == 0;
        try {
          HedgeReport report;
          cell.per_seed.push_back(run_method_cell(method, batch, inst, plan, train_seed,
                                                  result.test_seed,
                                                  keep_report ? &report : nullptr));
          if (keep_report) result.figure_reports[method] = std::move(report);
        } catch (const std::exception& e) {
          cell.error = std::string(e.what());
          cell.per_seed.push_back(std::numeric_limits<double>::quiet_NaN());
        }
      }
    }
  }

  for (auto& [method, cells] : result.cells) {
    for (auto& cell : cells) {
      std::vector<double> vals;
      for (double v : cell.per_seed)
        if (std::isfinite(v)) vals.push_back(v);
      if (vals.empty()) {
        cell.median = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      std::sort(vals.begin(), vals.end());
      const std::size_t n = vals.size();
      cell.median = n % 2 == 1 ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
    }
  }
  return result;
}

}  // namespace dml::hedge
