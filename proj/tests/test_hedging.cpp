#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "dml/analytic.hpp"
#include "dml/hedging.hpp"
#include "dml/rng.hpp"
#include "oracles.hpp"

using namespace dml::hedge;
using dml::instruments::Instrument;
using dml::instruments::Kind;
using dml::market::MarketConfig;

namespace {
const Instrument kCall{Kind::european_call, 110.0, 1.0};
}

TEST_CASE("a deterministic market hedges to exactly zero PnL") {
  MarketConfig cfg;
  cfg.sigma = 0.0;
  const Instrument itm{Kind::european_call, 90.0, 1.0};  // premium 10 > 0
  const auto report = backtest(analytic_source(itm, cfg), cfg, itm, 500, 3);
  CHECK(report.premium == doctest::Approx(10.0));
  CHECK(report.rel_error == 0.0);
  for (double p : report.pnl_rel) CHECK(p == 0.0);
}

TEST_CASE("an unhedged book reproduces the payoff distribution") {
  MarketConfig cfg;
  const std::size_t n = 20000;
  const auto report = backtest(zero_source(), cfg, kCall, n, 11);

  // direct recomputation on the identical test batch
  const auto batch = dml::market::simulate(cfg, n, 11);
  const double v0 = dml::analytic::bs_call(cfg.s0, 110.0, cfg.sigma, 1.0).price;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = dml::instruments::payoff(kCall, batch.terminal(i));
  for (std::size_t i = 0; i < n; ++i)
    CHECK(report.pnl_rel[i] == doctest::Approx((v0 - x[i]) / v0).epsilon(1e-12));
  const double std_x = std::sqrt(dml::reduce::mean_var(x).var);
  CHECK(report.rel_error == doctest::Approx(std_x / v0).epsilon(1e-12));
}

TEST_CASE("weekly analytic delta hedging lands at its theoretical error level") {
  MarketConfig cfg;  // s0 100, sigma 0.2, T 1, 52 steps
  const auto report = backtest(analytic_source(kCall, cfg), cfg, kCall, 20000, 17);

  // Discrete-hedging noise scale: sqrt(pi/4) sigma sqrt(dt) vega / premium.
  const auto quote = dml::analytic::bs_call(cfg.s0, 110.0, cfg.sigma, 1.0);
  const double vega = cfg.s0 * dml::analytic::norm_pdf(quote.d1);
  const double dk = std::sqrt(std::numbers::pi / 4.0) * cfg.sigma * std::sqrt(cfg.dt()) * vega /
                    quote.price;
  CHECK(report.rel_error == doctest::Approx(dk).epsilon(0.15));
  CHECK(report.rel_error > 0.19);
  CHECK(report.rel_error < 0.25);

  SUBCASE("hedging reduces the risk of the unhedged book") {
    const auto unhedged = backtest(zero_source(), cfg, kCall, 20000, 17);
    CHECK(report.rel_error < unhedged.rel_error);
  }

  SUBCASE("doubling the rebalance frequency shrinks the error") {
    MarketConfig fine = cfg;
    fine.n_steps = 104;
    const auto finer = backtest(analytic_source(kCall, fine), fine, kCall, 20000, 17);
    CHECK(finer.rel_error < report.rel_error);
  }

  SUBCASE("at the money the weekly analytic error sits near 0.12") {
    // The strike-100 configuration reproduces the canonical weekly-hedging
    // benchmark value; the strike-110 default sits near 0.22 (see above).
    MarketConfig atm = cfg;
    const Instrument call_atm{Kind::european_call, 100.0, 1.0};
    const auto r = backtest(analytic_source(call_atm, atm), atm, call_atm, 20000, 17);
    CHECK(r.rel_error > 0.10);
    CHECK(r.rel_error < 0.14);
  }
}

TEST_CASE("per-path PnL is self-financing arithmetic over recorded positions") {
  MarketConfig cfg;
  BacktestOptions opt;
  opt.record_positions = true;
  const std::size_t n = 200;
  const auto report = backtest(analytic_source(kCall, cfg), cfg, kCall, n, 29, opt);
  REQUIRE(report.positions.size() == n * 52);

  const auto batch = dml::market::simulate(cfg, n, 29);
  for (std::size_t i = 0; i < n; ++i) {
    double pnl = report.premium - dml::instruments::payoff(kCall, batch.terminal(i));
    for (std::size_t d = 0; d < 52; ++d)
      pnl += report.positions[i * 52 + d] * (batch.spot(i, d + 1) - batch.spot(i, d));
    CHECK(report.pnl_rel[i] == doctest::Approx(pnl / report.premium).epsilon(1e-12));
  }
}

TEST_CASE("histogram clamps outliers and counts every path") {
  MarketConfig cfg;
  const std::size_t n = 5000;
  const auto report = backtest(zero_source(), cfg, kCall, n, 31);
  REQUIRE(report.hist.counts.size() == 61);
  std::uint64_t total = 0;
  for (auto c : report.hist.counts) total += c;
  CHECK(total == n);
  // unhedged relative PnL reaches below -1, so the clamp bin is busy
  CHECK(report.hist.counts.front() > 0);
}

TEST_CASE("backtest validation and failure reporting") {
  MarketConfig cfg;
  Instrument wrong = kCall;
  wrong.maturity = 2.0;
  CHECK_THROWS_AS(backtest(analytic_source(kCall, cfg), cfg, wrong, 10, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(backtest(DeltaSource{}, cfg, kCall, 10, 1), std::invalid_argument);

  DeltaSource broken{"broken", [](std::size_t d, double, double, double) {
                       return d >= 3 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
                     }};
  try {
    backtest(broken, cfg, kCall, 10, 1);
    FAIL("expected a backtest error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("broken") != std::string::npos);
    CHECK(msg.find("date index 3") != std::string::npos);
  }

  // sigma=0 makes the 110-call premium zero: relative PnL is undefined
  MarketConfig flat;
  flat.sigma = 0.0;
  CHECK_THROWS_AS(backtest(analytic_source(kCall, flat), flat, kCall, 10, 1),
                  std::invalid_argument);
}

TEST_CASE("serial and parallel backtests agree bit for bit") {
  MarketConfig cfg;
  const auto a = backtest(analytic_source(kCall, cfg), cfg, kCall, 4000, 37);
  const auto b = backtest_serial(analytic_source(kCall, cfg), cfg, kCall, 4000, 37);
  CHECK(a.pnl_rel == b.pnl_rel);
  CHECK(a.rel_error == b.rel_error);
  CHECK(a.hist.counts == b.hist.counts);
}

TEST_CASE("poly delta source reuses the first fitted date for earlier queries") {
  MarketConfig cfg;
  const auto batch = dml::market::propagate_tangents(dml::market::simulate(cfg, 2000, 41));
  const std::vector<std::size_t> dates{1, 2};
  const auto ts =
      dml::instruments::build_training_set(batch, kCall, dml::instruments::SampleMode::per_date,
                                           dates, 1);
  auto model = std::make_shared<dml::lsmc::PolyModel>(dml::lsmc::fit_poly(ts, 3));
  const auto source = poly_source(model);
  CHECK(source.delta(0, 0.0, 1.0, 100.0) == dml::lsmc::poly_delta(*model, 1, 100.0));
  CHECK(source.delta(2, 0.0, 1.0, 100.0) == dml::lsmc::poly_delta(*model, 2, 100.0));
}

TEST_CASE("pnl and histogram CSV schemas") {
  MarketConfig cfg;
  const auto report = backtest(analytic_source(kCall, cfg), cfg, kCall, 50, 43);
  std::ostringstream pnl, hist;
  dump_pnl_csv(report, pnl);
  dump_hist_csv(report, hist);
  CHECK(pnl.str().rfind("path_id,pnl_rel\n", 0) == 0);
  CHECK(hist.str().rfind("bin_left,bin_right,count,method\n", 0) == 0);
  std::istringstream in(pnl.str());
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 50);
}

TEST_CASE("a small table1 grid runs shared-batch cells deterministically") {
  MarketConfig cfg;
  Table1Config plan;
  plan.sizes = {400, 700};
  plan.n_seeds = 1;
  plan.poly_degree = 3;
  plan.n_test_paths = 3000;
  plan.root_seed = 5;
  plan.net_cfg.epochs = 4;
  plan.net_cfg.batch_size = 64;
  plan.net_cfg.hidden_width = 6;
  plan.net_cfg.hidden_layers = 2;

  const auto a = run_table1(cfg, kCall, plan);
  const auto b = run_table1(cfg, kCall, plan);

  CHECK(a.analytic == b.analytic);
  CHECK(a.analytic > 0.15);  // the 110-strike weekly benchmark sits near 0.22
  CHECK(a.analytic < 0.30);
  REQUIRE(a.methods.size() == 3);
  for (const auto& method : a.methods) {
    const auto& cells = a.cells.at(method);
    REQUIRE(cells.size() == plan.sizes.size());
    for (std::size_t si = 0; si < cells.size(); ++si) {
      CHECK(cells[si].error.empty());
      REQUIRE(cells[si].per_seed.size() == 1);
      CHECK(std::isfinite(cells[si].median));
      CHECK(cells[si].median == b.cells.at(method)[si].median);
      // every learned method carries more risk than the analytic hedge
      CHECK(cells[si].median > a.analytic);
    }
  }
  CHECK(a.figure_reports.count("analytic") == 1);
  CHECK(a.figure_reports.count("diff_nn") == 1);
  CHECK(a.figure_reports.at("diff_nn").n_test_paths == plan.n_test_paths);
}

TEST_CASE("table1 records per-cell failures and keeps going") {
  MarketConfig cfg;
  Table1Config plan;
  plan.sizes = {6};  // six rows cannot support a degree-5 fit
  plan.n_seeds = 1;
  plan.poly_degree = 5;
  plan.n_test_paths = 500;
  plan.root_seed = 7;
  plan.net_cfg.epochs = 2;
  plan.net_cfg.batch_size = 4;
  plan.net_cfg.hidden_width = 4;
  plan.net_cfg.hidden_layers = 1;

  const auto r = run_table1(cfg, kCall, plan);
  CHECK_FALSE(r.cells.at("lsmc_poly")[0].error.empty());
  CHECK(std::isnan(r.cells.at("lsmc_poly")[0].median));
  CHECK(r.cells.at("diff_nn")[0].error.empty());
  CHECK(std::isfinite(r.cells.at("diff_nn")[0].median));
}
