#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dml/market_sim.hpp"

namespace dml::instruments {

enum class Kind { european_call, digital };

std::string kind_name(Kind k);
Kind kind_from_name(const std::string& name);

struct Instrument {
  Kind kind = Kind::european_call;
  double strike = 110.0;
  double maturity = 1.0;  // years
  void validate() const;
};

// terminal payoff: call (z-K)^+, digital 1{z > K}
double payoff(const Instrument& inst, double z_T);

// pathwise differential label for the call: 1{z_T > K} * dZ_T/dZ_t
double call_diff_label(const Instrument& inst, double z_T, double tangent);

// smoothed-Dirac differential label for the digital:
// sqrt(n/pi) exp(-n (z_T - K)^2) * dZ_T/dZ_t
double digital_diff_label(const Instrument& inst, double z_T, double tangent, double bandwidth_n);

// Default kernel parameter: n = m^{2/5} / (2 h^2) with h the sample standard
// deviation of the terminal spots, i.e. a kernel width of order h * m^{-1/5}.
double default_digital_bandwidth(std::span<const double> terminal_spots);

enum class SampleMode { per_date, time_feature };

// Regression rows (z, tau, x, q) plus the grid index each row was sampled at.
struct TrainingSet {
  std::vector<double> z;    // spot at the sample date
  std::vector<double> tau;  // time to maturity
  std::vector<double> x;    // payoff label
  std::vector<double> q;    // differential label
  std::vector<std::uint32_t> date_index;
  Instrument instrument;
  market::MarketConfig market;
  std::uint64_t seed = 0;
  std::size_t size() const { return z.size(); }
};

// time_feature: one row per path at a uniformly drawn date from `dates`.
// per_date: a full block of rows per requested date, date-major.
TrainingSet build_training_set(const market::PathBatch& batch, const Instrument& inst,
                               SampleMode mode, std::span<const std::size_t> dates,
                               std::uint64_t seed);

// CSV dump, header: z,tau,x,q
void dump_csv(const TrainingSet& ts, std::ostream& out);

}  // namespace dml::instruments
