#include "dml/instruments.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "dml/io.hpp"
#include "dml/reduce.hpp"
#include "dml/rng.hpp"

namespace dml::instruments {

std::string kind_name(Kind k) {
  return k == Kind::european_call ? "european_call" : "digital";
}

Kind kind_from_name(const std::string& name) {
  if (name == "european_call" || name == "call") return Kind::european_call;
  if (name == "digital") return Kind::digital;
  throw std::invalid_argument("unknown instrument kind: " + name);
}

void Instrument::validate() const {
  if (!(strike > 0.0)) throw std::invalid_argument("Instrument: strike must be positive");
  if (!(maturity > 0.0)) throw std::invalid_argument("Instrument: maturity must be positive");
}

double payoff(const Instrument& inst, double z_T) {
  if (inst.kind == Kind::european_call) return z_T > inst.strike ? z_T - inst.strike : 0.0;
  return z_T > inst.strike ? 1.0 : 0.0;
}

double call_diff_label(const Instrument& inst, double z_T, double tangent) {
  return z_T > inst.strike ? tangent : 0.0;
}

double digital_diff_label(const Instrument& inst, double z_T, double tangent, double bandwidth_n) {
  if (!(bandwidth_n > 0.0))
    throw std::invalid_argument("digital_diff_label: bandwidth must be positive");
  const double d = z_T - inst.strike;
  return std::sqrt(bandwidth_n / std::numbers::pi) * std::exp(-bandwidth_n * d * d) * tangent;
}

double default_digital_bandwidth(std::span<const double> terminal_spots) {
  if (terminal_spots.size() < 2)
    throw std::invalid_argument("default_digital_bandwidth: need at least 2 samples");
  const auto mv = reduce::mean_var(terminal_spots);
  if (!(mv.var > 0.0))
    throw std::invalid_argument("default_digital_bandwidth: terminal spots are degenerate");
  const double m = static_cast<double>(terminal_spots.size());
  return std::pow(m, 0.4) / (2.0 * mv.var);
}

namespace {

double diff_label(const Instrument& inst, double z_T, double tangent, double bandwidth) {
  if (inst.kind == Kind::european_call) return call_diff_label(inst, z_T, tangent);
  return digital_diff_label(inst, z_T, tangent, bandwidth);
}

}  // namespace

TrainingSet build_training_set(const market::PathBatch& batch, const Instrument& inst,
                               SampleMode mode, std::span<const std::size_t> dates,
                               std::uint64_t seed) {
  inst.validate();
  if (batch.n_paths == 0) throw std::invalid_argument("build_training_set: empty batch");
  if (!batch.has_tangents())
    throw std::invalid_argument("build_training_set: batch needs propagated tangents");
  if (dates.empty()) throw std::invalid_argument("build_training_set: no sample dates given");
  const std::size_t n_steps = batch.n_steps();
  for (std::size_t d : dates)
    if (d >= n_steps)
      throw std::invalid_argument("build_training_set: date index " + std::to_string(d) +
                                  " is not strictly before maturity");

  TrainingSet ts;
  ts.instrument = inst;
  ts.market = batch.cfg;
  ts.seed = seed;

  // Kernel bandwidth for digital labels; the per-date delta estimate averages
  // one label per path, so the path count is the sample size that matters.
  double bandwidth = 1.0;
  if (inst.kind == Kind::digital) {
    std::vector<double> zT(batch.n_paths);
    for (std::size_t i = 0; i < batch.n_paths; ++i) zT[i] = batch.terminal(i);
    bandwidth = default_digital_bandwidth(zT);
  }

  const double T = batch.cfg.maturity;
  auto push_row = [&](std::size_t path, std::size_t date) {
    const double z = batch.spot(path, date);
    const double z_T = batch.terminal(path);
    ts.z.push_back(z);
    ts.tau.push_back(T - batch.grid[date]);
    ts.x.push_back(payoff(inst, z_T));
    ts.q.push_back(diff_label(inst, z_T, batch.tangent(path, date), bandwidth));
    ts.date_index.push_back(static_cast<std::uint32_t>(date));
  };

  if (mode == SampleMode::time_feature) {
    ts.z.reserve(batch.n_paths);
    const std::uint64_t date_seed = rng::label_seed(seed, "ts.dates");
    for (std::size_t i = 0; i < batch.n_paths; ++i) {
      rng::NormalStream per_path(date_seed, i);
      push_row(i, dates[per_path.below(dates.size())]);
    }
  } else {
    ts.z.reserve(batch.n_paths * dates.size());
    for (std::size_t d : dates)
      for (std::size_t i = 0; i < batch.n_paths; ++i) push_row(i, d);
  }
  return ts;
}

void dump_csv(const TrainingSet& ts, std::ostream& out) {
  out << "z,tau,x,q\n";
  for (std::size_t i = 0; i < ts.size(); ++i)
    out << io::fmt(ts.z[i]) << ',' << io::fmt(ts.tau[i]) << ',' << io::fmt(ts.x[i]) << ','
        << io::fmt(ts.q[i]) << '\n';
}

}  // namespace dml::instruments
