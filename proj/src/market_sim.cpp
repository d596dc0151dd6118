#include "dml/market_sim.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "dml/io.hpp"
#include "dml/rng.hpp"

namespace dml::market {

void MarketConfig::validate() const {
  if (!(s0 > 0.0)) throw std::invalid_argument("MarketConfig: s0 must be positive");
  if (sigma < 0.0) throw std::invalid_argument("MarketConfig: sigma must be non-negative");
  if (!(maturity > 0.0)) throw std::invalid_argument("MarketConfig: maturity must be positive");
  if (n_steps < 1) throw std::invalid_argument("MarketConfig: n_steps must be at least 1");
  if (!std::isfinite(s0) || !std::isfinite(sigma) || !std::isfinite(r) || !std::isfinite(maturity))
    throw std::invalid_argument("MarketConfig: parameters must be finite");
}

namespace {

PathBatch make_batch(const MarketConfig& cfg, std::size_t n_paths, std::uint64_t seed) {
  cfg.validate();
  if (n_paths < 1) throw std::invalid_argument("simulate: n_paths must be at least 1");
  PathBatch b;
  b.cfg = cfg;
  b.seed = seed;
  b.n_paths = n_paths;
  const std::size_t n = static_cast<std::size_t>(cfg.n_steps);
  b.grid.resize(n + 1);
  for (std::size_t j = 0; j <= n; ++j) b.grid[j] = cfg.maturity * static_cast<double>(j) / static_cast<double>(n);
  b.grid[n] = cfg.maturity;
  b.paths.resize(n_paths * (n + 1));
  b.shocks.resize(n_paths * n);
  b.floored.assign(n_paths, 0);
  return b;
}

// One path of Z_{j+1} = Z_j (1 + r dt + sigma sqrt(dt) N_j), absorbed at zero.
// Shocks are drawn for every step even after absorption so the stored stream
// stays aligned with the generator.
void simulate_path(const MarketConfig& cfg, std::uint64_t seed, std::size_t path_id,
                   double* path, double* shocks, std::uint8_t* floored) {
  rng::NormalStream gen(seed, path_id);
  const double dt = cfg.dt();
  const double vol = cfg.sigma * std::sqrt(dt);
  const double drift = cfg.r * dt;
  path[0] = cfg.s0;
  bool dead = false;
  for (int j = 0; j < cfg.n_steps; ++j) {
    const double n = gen.normal();
    shocks[j] = n;
    if (dead) {
      path[j + 1] = 0.0;
      continue;
    }
    const double step = path[j] * (1.0 + drift + vol * n);
    if (step <= 0.0) {
      path[j + 1] = 0.0;
      dead = true;
    } else {
      path[j + 1] = step;
    }
  }
  *floored = dead ? 1 : 0;
}

void tangents_path(const MarketConfig& cfg, const double* shocks, std::uint8_t floored,
                   double* tang) {
  const std::size_t n = static_cast<std::size_t>(cfg.n_steps);
  tang[n] = 1.0;  // dZ_T/dZ_T
  if (floored) {
    for (std::size_t j = 0; j < n; ++j) tang[j] = 0.0;
    return;
  }
  const double dt = cfg.dt();
  const double vol = cfg.sigma * std::sqrt(dt);
  const double drift = cfg.r * dt;
  double acc = 1.0;
  for (std::size_t j = n; j-- > 0;) {
    acc *= 1.0 + drift + vol * shocks[j];
    tang[j] = acc;
  }
}

}  // namespace

PathBatch simulate(const MarketConfig& cfg, std::size_t n_paths, std::uint64_t seed) {
  PathBatch b = make_batch(cfg, n_paths, seed);
  const std::size_t row = b.n_steps() + 1;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n_paths); ++i) {
    const auto u = static_cast<std::size_t>(i);
    simulate_path(cfg, seed, u, b.paths.data() + u * row, b.shocks.data() + u * b.n_steps(),
                  &b.floored[u]);
  }
  return b;
}

PathBatch simulate_serial(const MarketConfig& cfg, std::size_t n_paths, std::uint64_t seed) {
  PathBatch b = make_batch(cfg, n_paths, seed);
  const std::size_t row = b.n_steps() + 1;
  for (std::size_t u = 0; u < n_paths; ++u)
    simulate_path(cfg, seed, u, b.paths.data() + u * row, b.shocks.data() + u * b.n_steps(),
                  &b.floored[u]);
  return b;
}

PathBatch propagate_tangents(PathBatch batch) {
  const std::size_t n = batch.n_steps();
  batch.tangents.resize(batch.n_paths * (n + 1));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(batch.n_paths); ++i) {
    const auto u = static_cast<std::size_t>(i);
    tangents_path(batch.cfg, batch.shocks.data() + u * n, batch.floored[u],
                  batch.tangents.data() + u * (n + 1));
  }
  return batch;
}

PathBatch propagate_tangents_serial(PathBatch batch) {
  const std::size_t n = batch.n_steps();
  batch.tangents.resize(batch.n_paths * (n + 1));
  for (std::size_t u = 0; u < batch.n_paths; ++u)
    tangents_path(batch.cfg, batch.shocks.data() + u * n, batch.floored[u],
                  batch.tangents.data() + u * (n + 1));
  return batch;
}

void dump_paths_csv(const PathBatch& batch, std::ostream& out) {
  if (!batch.has_tangents())
    throw std::logic_error("dump_paths_csv: tangents not propagated");
  out << "path_id,step,time,spot,tangent_to_T\n";
  const std::size_t n = batch.n_steps();
  for (std::size_t i = 0; i < batch.n_paths; ++i)
    for (std::size_t j = 0; j <= n; ++j)
      out << i << ',' << j << ',' << io::fmt(batch.grid[j]) << ',' << io::fmt(batch.spot(i, j))
          << ',' << io::fmt(batch.tangent(i, j)) << '\n';
}

}  // namespace dml::market
