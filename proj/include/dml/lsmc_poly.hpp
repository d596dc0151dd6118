#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dml/instruments.hpp"

namespace dml::lsmc {

// One per-date monomial regression in standardized spot.
struct DateFit {
  std::uint32_t date_index = 0;
  double time = 0.0;
  int degree = 0;
  double center = 0.0;
  double scale = 1.0;
  std::vector<double> coeffs;  // beta_0..beta_degree on (z - center)/scale
};

struct PolyModel {
  std::vector<DateFit> fits;  // ascending date_index
  const DateFit* find(std::uint32_t date_index) const noexcept;
  const DateFit& at(std::uint32_t date_index) const;  // throws std::out_of_range
};

// Ordinary least squares per date via Householder QR (one regression per
// distinct date_index in the training set). Fits are independent across dates.
PolyModel fit_poly(const instruments::TrainingSet& ts, int degree);

double poly_price(const PolyModel& model, std::uint32_t date_index, double z);
double poly_delta(const PolyModel& model, std::uint32_t date_index, double z);

std::string poly_to_json(const PolyModel& model);
PolyModel poly_from_json(const std::string& text);

namespace detail {
// min ||A beta - y||_2 for row-major A (m x n, m >= n). Throws std::runtime_error
// naming the offending column on rank deficiency.
std::vector<double> lstsq_qr(std::vector<double> a, std::size_t m, std::size_t n,
                             std::vector<double> y);
}  // namespace detail

}  // namespace dml::lsmc
