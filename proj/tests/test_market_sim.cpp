#include <doctest.h>

#include <cmath>
#include <iostream>
#include <sstream>

#include "dml/market_sim.hpp"
#include "oracles.hpp"

using namespace dml::market;

TEST_CASE("deterministic degenerate dynamics") {
  SUBCASE("sigma=0 r=0 keeps every path constant") {
    MarketConfig cfg;
    cfg.sigma = 0.0;
    const auto b = simulate(cfg, 16, 1);
    for (std::size_t i = 0; i < b.n_paths; ++i)
      for (std::size_t j = 0; j <= b.n_steps(); ++j) CHECK(b.spot(i, j) == 100.0);
  }
  SUBCASE("one deterministic Euler step of drift") {
    MarketConfig cfg;
    cfg.sigma = 0.0;
    cfg.r = 0.05;
    cfg.n_steps = 1;
    const auto b = simulate(cfg, 8, 1);
    for (std::size_t i = 0; i < b.n_paths; ++i)
      CHECK(b.terminal(i) == doctest::Approx(105.0).epsilon(1e-15));
  }
}

TEST_CASE("config validation") {
  MarketConfig cfg;
  cfg.s0 = 0.0;
  CHECK_THROWS_AS(simulate(cfg, 4, 1), std::invalid_argument);
  cfg = {};
  cfg.maturity = -1.0;
  CHECK_THROWS_AS(simulate(cfg, 4, 1), std::invalid_argument);
  cfg = {};
  cfg.n_steps = 0;
  CHECK_THROWS_AS(simulate(cfg, 4, 1), std::invalid_argument);
  CHECK_THROWS_AS(simulate(MarketConfig{}, 0, 1), std::invalid_argument);
}

TEST_CASE("identical seeds reproduce batches bit for bit, and serial == openmp") {
  MarketConfig cfg;
  const auto a = simulate(cfg, 4096, 99);
  const auto b = simulate(cfg, 4096, 99);
  const auto c = simulate_serial(cfg, 4096, 99);
  CHECK(a.paths == b.paths);
  CHECK(a.shocks == b.shocks);
  CHECK(a.paths == c.paths);
  CHECK(a.shocks == c.shocks);

  const auto at = propagate_tangents(a);
  const auto ct = propagate_tangents_serial(c);
  CHECK(at.tangents == ct.tangents);

  const auto d = simulate(cfg, 4096, 100);
  CHECK(d.paths != a.paths);
}

TEST_CASE("martingale property at r=0") {
  MarketConfig cfg;  // sigma 0.2, r 0
  const std::size_t n = 100000;
  const auto b = simulate(cfg, n, 7);
  std::vector<double> zT(n);
  for (std::size_t i = 0; i < n; ++i) zT[i] = b.terminal(i);
  const auto st = oracles::stats_of(zT);
  CHECK(std::fabs(st.mean - cfg.s0) < 3.0 * st.stderr_mean);
}

TEST_CASE("tangent identity on unfloored paths") {
  MarketConfig cfg;
  const auto b = propagate_tangents(simulate(cfg, 2000, 21));
  for (std::size_t i = 0; i < b.n_paths; ++i) {
    REQUIRE(b.floored[i] == 0);
    CHECK(b.tangent(i, b.n_steps()) == 1.0);
    for (std::size_t j = 0; j <= b.n_steps(); ++j) {
      const double lhs = b.tangent(i, j) * b.spot(i, j);
      CHECK(lhs == doctest::Approx(b.terminal(i)).epsilon(1e-12));
    }
  }
}

TEST_CASE("tangents are all ones for sigma=0 r=0") {
  MarketConfig cfg;
  cfg.sigma = 0.0;
  const auto b = propagate_tangents(simulate(cfg, 16, 3));
  for (double t : b.tangents) CHECK(t == 1.0);
}

TEST_CASE("zero crossing floors, freezes and flags the path") {
  MarketConfig cfg;
  cfg.sigma = 8.0;  // per-step factor 1 + 8 N goes negative often
  cfg.n_steps = 4;
  const auto b = propagate_tangents(simulate(cfg, 4000, 5));
  std::size_t n_floored = 0;
  for (std::size_t i = 0; i < b.n_paths; ++i) {
    bool hit_zero = false;
    for (std::size_t j = 0; j <= b.n_steps(); ++j) {
      const double s = b.spot(i, j);
      CHECK(std::isfinite(s));
      CHECK(s >= 0.0);
      if (hit_zero) CHECK(s == 0.0);  // absorbing
      if (s == 0.0) hit_zero = true;
    }
    CHECK(static_cast<bool>(b.floored[i]) == hit_zero);
    if (b.floored[i]) {
      ++n_floored;
      for (std::size_t j = 0; j < b.n_steps(); ++j) CHECK(b.tangent(i, j) == 0.0);
      CHECK(b.tangent(i, b.n_steps()) == 1.0);
    } else {
      CHECK(b.tangent(i, 0) * b.spot(i, 0) == doctest::Approx(b.terminal(i)).epsilon(1e-12));
    }
  }
  CHECK(n_floored > 0);
  CHECK(n_floored < b.n_paths);
}

TEST_CASE("log-variance matches the exact Euler moment within Monte Carlo error") {
  MarketConfig cfg;  // sigma=0.2, T=1, n_steps=52
  const std::size_t n = 100000;
  const auto b = simulate(cfg, n, 17);
  std::vector<double> logs;
  logs.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (!b.floored[i]) logs.push_back(std::log(b.terminal(i) / cfg.s0));
  REQUIRE(logs.size() == n);
  const auto st = oracles::stats_of(logs);

  // Exact per-step moments of log(1 + sigma sqrt(dt) N) by quadrature;
  // the gap to sigma^2 T is the O(dt) Euler bias the tolerance must carry.
  const double vol = cfg.sigma * std::sqrt(cfg.dt());
  const double m1 = oracles::simpson(
      [&](double x) { return std::log(1.0 + vol * x) * oracles::npdf(x); }, -10.0, 10.0, 200000);
  const double m2 = oracles::simpson(
      [&](double x) {
        const double l = std::log(1.0 + vol * x);
        return l * l * oracles::npdf(x);
      },
      -10.0, 10.0, 200000);
  const double exact_var = static_cast<double>(cfg.n_steps) * (m2 - m1 * m1);
  const double sigma2T = cfg.sigma * cfg.sigma * cfg.maturity;
  const double euler_bias = std::fabs(exact_var - sigma2T);
  CHECK(euler_bias < 5e-4);  // order dt at weekly steps

  const double stderr_var = st.var * std::sqrt(2.0 / static_cast<double>(logs.size()));
  CHECK(std::fabs(st.var - sigma2T) < 3.0 * stderr_var + euler_bias);
}

TEST_CASE("paths CSV dump has the documented schema") {
  MarketConfig cfg;
  cfg.n_steps = 3;
  const auto plain = simulate(cfg, 2, 9);
  CHECK_THROWS_AS(dump_paths_csv(plain, std::cout), std::logic_error);

  const auto b = propagate_tangents(plain);
  std::ostringstream out;
  dump_paths_csv(b, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "path_id,step,time,spot,tangent_to_T");
  std::size_t rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2 * 4);
}
