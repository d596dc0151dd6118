#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

// Closed-form Black-Scholes quotes and the lognormal density. These are the
// ground truth the regression methods are measured against, so the normal CDF
// goes through erfc (absolute error well below 1e-12 everywhere).
namespace dml::analytic {

inline double norm_pdf(double x) { return 0.3989422804014326779 * std::exp(-0.5 * x * x); }

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

struct BsQuote {
  double price = 0.0;
  double delta = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

namespace detail {
inline void check_inputs(const char* fn, double s, double k, double sigma, double tau) {
  if (!(s > 0.0)) throw std::domain_error(std::string(fn) + ": spot must be positive");
  if (!(k > 0.0)) throw std::domain_error(std::string(fn) + ": strike must be positive");
  if (!(tau > 0.0)) throw std::domain_error(std::string(fn) + ": time to maturity must be positive");
  if (sigma < 0.0) throw std::domain_error(std::string(fn) + ": volatility must be non-negative");
}
}  // namespace detail

inline BsQuote bs_call(double s, double k, double sigma, double tau, double r = 0.0) {
  detail::check_inputs("bs_call", s, k, sigma, tau);
  BsQuote q;
  if (sigma == 0.0) {
    // deterministic forward: discounted intrinsic value
    const double fwd = s * std::exp(r * tau);
    q.price = std::max(s - k * std::exp(-r * tau), 0.0);
    q.delta = fwd >= k ? 1.0 : 0.0;
    q.d1 = q.d2 = fwd >= k ? std::numeric_limits<double>::infinity()
                           : -std::numeric_limits<double>::infinity();
    return q;
  }
  const double vol = sigma * std::sqrt(tau);
  q.d1 = (std::log(s / k) + (r + 0.5 * sigma * sigma) * tau) / vol;
  q.d2 = q.d1 - vol;
  q.price = s * norm_cdf(q.d1) - k * std::exp(-r * tau) * norm_cdf(q.d2);
  q.delta = norm_cdf(q.d1);
  return q;
}

inline BsQuote bs_digital(double s, double k, double sigma, double tau, double r = 0.0) {
  detail::check_inputs("bs_digital", s, k, sigma, tau);
  BsQuote q;
  const double disc = std::exp(-r * tau);
  if (sigma == 0.0) {
    const double fwd = s * std::exp(r * tau);
    if (fwd == k)
      throw std::domain_error("bs_digital: delta undefined at the sigma=0 boundary s*e^{r tau} == k");
    q.price = fwd > k ? disc : 0.0;
    q.delta = 0.0;
    q.d1 = q.d2 = fwd > k ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
    return q;
  }
  const double vol = sigma * std::sqrt(tau);
  q.d1 = (std::log(s / k) + (r + 0.5 * sigma * sigma) * tau) / vol;
  q.d2 = q.d1 - vol;
  q.price = disc * norm_cdf(q.d2);
  q.delta = disc * norm_pdf(q.d2) / (s * vol);
  return q;
}

// density of Z_tau under geometric Brownian motion started at s0
inline double lognormal_pdf(double z, double s0, double sigma, double tau, double r = 0.0) {
  detail::check_inputs("lognormal_pdf", s0, 1.0, sigma, tau);
  if (sigma == 0.0) throw std::domain_error("lognormal_pdf: degenerate at sigma == 0");
  if (z <= 0.0) return 0.0;
  const double vol = sigma * std::sqrt(tau);
  const double m = std::log(s0) + (r - 0.5 * sigma * sigma) * tau;
  const double u = (std::log(z) - m) / vol;
  return norm_pdf(u) / (z * vol);
}

}  // namespace dml::analytic
