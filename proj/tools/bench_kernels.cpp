// Times the OpenMP kernels against their serial reference implementations and
// checks that both produce bit-identical results.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dml/hedging.hpp"
#include "dml/instruments.hpp"
#include "dml/market_sim.hpp"
#include "dml/rng.hpp"
#include "dml/twin_net.hpp"

namespace {

double time_of(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

void report(const char* kernel, double serial_ms, double omp_ms, bool identical) {
  std::printf("%-18s %10.1f ms %10.1f ms   %5.2fx   %s\n", kernel, serial_ms, omp_ms,
              serial_ms / omp_ms, identical ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t n_paths = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 200000;
  std::size_t n_rows = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 8192;

#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (built without OpenMP)\n");
#endif
  std::printf("%-18s %13s %13s %8s\n", "kernel", "serial", "openmp", "speedup");

  const dml::market::MarketConfig cfg;
  const dml::instruments::Instrument call{dml::instruments::Kind::european_call, 110.0, 1.0};

  dml::market::PathBatch serial_batch, omp_batch;
  {
    const double ts = time_of([&] { serial_batch = dml::market::simulate_serial(cfg, n_paths, 7); });
    const double tp = time_of([&] { omp_batch = dml::market::simulate(cfg, n_paths, 7); });
    report("simulate", ts, tp, serial_batch.paths == omp_batch.paths);
  }
  {
    dml::market::PathBatch a, b;
    const double ts = time_of([&] { a = dml::market::propagate_tangents_serial(serial_batch); });
    const double tp = time_of([&] { b = dml::market::propagate_tangents(omp_batch); });
    report("tangents", ts, tp, a.tangents == b.tangents);
    serial_batch = std::move(a);
  }

  {
    const auto small = dml::market::propagate_tangents(
        dml::market::simulate(cfg, n_rows, 11));
    std::vector<std::size_t> dates(small.n_steps());
    for (std::size_t d = 0; d < dates.size(); ++d) dates[d] = d;
    const auto ts_rows = dml::instruments::build_training_set(
        small, call, dml::instruments::SampleMode::time_feature, dates, 13);
    const auto trained = [&] {
      dml::net::TrainConfig tc;
      tc.epochs = 1;
      tc.seed = 17;
      return dml::net::train(ts_rows, tc).params;
    }();
    std::vector<std::uint32_t> rows(ts_rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<std::uint32_t>(i);
    std::vector<double> gs, gp;
    const double ts = time_of([&] { gs = dml::net::param_gradients_serial(trained, ts_rows, rows, 1.0); });
    const double tp = time_of([&] { gp = dml::net::param_gradients(trained, ts_rows, rows, 1.0); });
    report("param_gradients", ts, tp, gs == gp);

    dml::hedge::HedgeReport rs, rp;
    const auto source = dml::hedge::net_source(
        std::make_shared<dml::net::NetParams>(trained), "diff_nn");
    const double hs = time_of([&] { rs = dml::hedge::backtest_serial(source, cfg, call, n_paths / 4, 23); });
    const double hp = time_of([&] { rp = dml::hedge::backtest(source, cfg, call, n_paths / 4, 23); });
    report("backtest", hs, hp, rs.pnl_rel == rp.pnl_rel && rs.rel_error == rp.rel_error);
  }
  return 0;
}
