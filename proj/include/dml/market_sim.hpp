#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace dml::market {

struct MarketConfig {
  double s0 = 100.0;      // initial spot
  double sigma = 0.2;     // volatility per sqrt(year)
  double r = 0.0;         // risk-free short rate
  double maturity = 1.0;  // years
  int n_steps = 52;       // uniform grid intervals (weekly by default)

  double dt() const { return maturity / n_steps; }
  void validate() const;  // throws std::invalid_argument
};

// Euler paths of the risk-neutral diffusion on a uniform grid. The raw normal
// draws are stored so the per-step multiplicative factors (and with them the
// pathwise tangents dZ_T/dZ_t) can be reconstructed exactly.
struct PathBatch {
  MarketConfig cfg;
  std::uint64_t seed = 0;
  std::size_t n_paths = 0;
  std::vector<double> grid;           // n_steps+1 times, grid[0]=0, grid[n]=T
  std::vector<double> paths;          // n_paths x (n_steps+1), row-major
  std::vector<double> shocks;         // n_paths x n_steps
  std::vector<double> tangents;       // n_paths x (n_steps+1); empty before propagate_tangents
  std::vector<std::uint8_t> floored;  // 1 where the path hit zero and was absorbed

  std::size_t n_steps() const { return grid.empty() ? 0 : grid.size() - 1; }
  double spot(std::size_t path, std::size_t step) const {
    return paths[path * (n_steps() + 1) + step];
  }
  double terminal(std::size_t path) const { return spot(path, n_steps()); }
  double tangent(std::size_t path, std::size_t step) const {
    return tangents[path * (n_steps() + 1) + step];
  }
  bool has_tangents() const { return !tangents.empty(); }
};

// Identical (cfg, n_paths, seed) give bit-identical batches; each path draws
// from its own substream so the parallel and serial kernels agree exactly.
PathBatch simulate(const MarketConfig& cfg, std::size_t n_paths, std::uint64_t seed);
PathBatch simulate_serial(const MarketConfig& cfg, std::size_t n_paths, std::uint64_t seed);

// Fills tangents[i][j] = dZ_T/dZ_{t_j} = prod_{k>=j} (1 + r dt + sigma sqrt(dt) N_k).
// Floored paths get tangent 0 everywhere except the defining tangents[i][n] = 1.
PathBatch propagate_tangents(PathBatch batch);
PathBatch propagate_tangents_serial(PathBatch batch);

// CSV dump, header: path_id,step,time,spot,tangent_to_T
void dump_paths_csv(const PathBatch& batch, std::ostream& out);

}  // namespace dml::market
