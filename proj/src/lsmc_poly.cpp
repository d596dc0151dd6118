#include "dml/lsmc_poly.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dml/reduce.hpp"

namespace dml::lsmc {

namespace detail {

std::vector<double> lstsq_qr(std::vector<double> a, std::size_t m, std::size_t n,
                             std::vector<double> y) {
  if (m < n) throw std::invalid_argument("lstsq_qr: fewer rows than columns");
  if (a.size() != m * n || y.size() != m) throw std::invalid_argument("lstsq_qr: shape mismatch");

  auto A = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
  std::vector<double> v(m);
  double diag_max = 0.0;

  for (std::size_t k = 0; k < n; ++k) {
    double norm2 = 0.0;
    for (std::size_t i = k; i < m; ++i) norm2 += A(i, k) * A(i, k);
    const double norm = std::sqrt(norm2);
    diag_max = std::max(diag_max, norm);
    if (!(norm > 1e-13 * std::max(1.0, diag_max)))
      throw std::runtime_error("lstsq_qr: rank-deficient design at column " + std::to_string(k));

    const double alpha = A(k, k) > 0.0 ? -norm : norm;
    v[k] = A(k, k) - alpha;
    for (std::size_t i = k + 1; i < m; ++i) v[i] = A(i, k);
    const double vtv = norm2 - 2.0 * alpha * A(k, k) + alpha * alpha;
    A(k, k) = alpha;
    for (std::size_t i = k + 1; i < m; ++i) A(i, k) = 0.0;
    if (vtv == 0.0) continue;

    for (std::size_t j = k + 1; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t i = k; i < m; ++i) dot += v[i] * A(i, j);
      const double c = 2.0 * dot / vtv;
      for (std::size_t i = k; i < m; ++i) A(i, j) -= c * v[i];
    }
    double dot = 0.0;
    for (std::size_t i = k; i < m; ++i) dot += v[i] * y[i];
    const double c = 2.0 * dot / vtv;
    for (std::size_t i = k; i < m; ++i) y[i] -= c * v[i];
  }

  std::vector<double> beta(n);
  for (std::size_t k = n; k-- > 0;) {
    double s = y[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= A(k, j) * beta[j];
    beta[k] = s / A(k, k);
  }
  return beta;
}

}  // namespace detail

const DateFit* PolyModel::find(std::uint32_t date_index) const noexcept {
  for (const auto& f : fits)
    if (f.date_index == date_index) return &f;
  return nullptr;
}

const DateFit& PolyModel::at(std::uint32_t date_index) const {
  const DateFit* f = find(date_index);
  if (!f)
    throw std::out_of_range("PolyModel: no fit for date index " + std::to_string(date_index));
  return *f;
}

PolyModel fit_poly(const instruments::TrainingSet& ts, int degree) {
  if (degree < 0) throw std::invalid_argument("fit_poly: degree must be non-negative");
  if (ts.size() == 0) throw std::invalid_argument("fit_poly: empty training set");

  std::map<std::uint32_t, std::vector<std::size_t>> by_date;
  for (std::size_t i = 0; i < ts.size(); ++i) by_date[ts.date_index[i]].push_back(i);

  PolyModel model;
  model.fits.reserve(by_date.size());
  for (auto it = by_date.begin(); it != by_date.end(); ++it) model.fits.push_back({it->first});

  const std::size_t n_cols = static_cast<std::size_t>(degree) + 1;
  std::vector<std::string> errors(model.fits.size());

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::ptrdiff_t fi = 0; fi < static_cast<std::ptrdiff_t>(model.fits.size()); ++fi) {
    DateFit& fit = model.fits[static_cast<std::size_t>(fi)];
    const auto& rows = by_date.at(fit.date_index);
    const std::size_t m = rows.size();
    const std::string where = "date index " + std::to_string(fit.date_index);
    try {
      if (m < n_cols + 1)
        throw std::runtime_error("need at least degree+2 rows");

      std::vector<double> z(m), x(m);
      for (std::size_t i = 0; i < m; ++i) {
        z[i] = ts.z[rows[i]];
        x[i] = ts.x[rows[i]];
      }
      {
        std::vector<double> distinct(z);
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        if (distinct.size() < n_cols)
          throw std::runtime_error("fewer than degree+1 distinct spots");
      }

      const auto mv = reduce::mean_var(z);
      fit.time = ts.market.maturity - ts.tau[rows[0]];
      fit.degree = degree;
      fit.center = mv.mean;
      fit.scale = mv.var > 0.0 ? std::sqrt(mv.var) : 1.0;

      std::vector<double> design(m * n_cols);
      for (std::size_t i = 0; i < m; ++i) {
        const double zt = (z[i] - fit.center) / fit.scale;
        double p = 1.0;
        for (std::size_t j = 0; j < n_cols; ++j) {
          design[i * n_cols + j] = p;
          p *= zt;
        }
      }
      fit.coeffs = detail::lstsq_qr(std::move(design), m, n_cols, std::move(x));
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(fi)] = "fit_poly: " + std::string(e.what()) + " at " + where;
    }
  }
  for (const auto& err : errors)
    if (!err.empty()) throw std::runtime_error(err);
  return model;
}

double poly_price(const PolyModel& model, std::uint32_t date_index, double z) {
  const DateFit& f = model.at(date_index);
  const double zt = (z - f.center) / f.scale;
  double acc = 0.0;
  for (std::size_t j = f.coeffs.size(); j-- > 0;) acc = acc * zt + f.coeffs[j];
  return acc;
}

double poly_delta(const PolyModel& model, std::uint32_t date_index, double z) {
  const DateFit& f = model.at(date_index);
  const double zt = (z - f.center) / f.scale;
  double acc = 0.0;
  for (std::size_t j = f.coeffs.size(); j-- > 1;)
    acc = acc * zt + f.coeffs[j] * static_cast<double>(j);
  return acc / f.scale;
}

std::string poly_to_json(const PolyModel& model) {
  nlohmann::ordered_json j;
  j["model"] = "lsmc_poly";
  auto& dates = j["dates"];
  dates = nlohmann::ordered_json::array();
  for (const auto& f : model.fits) {
    nlohmann::ordered_json d;
    d["date_index"] = f.date_index;
    d["time"] = f.time;
    d["degree"] = f.degree;
    d["center"] = f.center;
    d["scale"] = f.scale;
    d["coeffs"] = f.coeffs;
    dates.push_back(std::move(d));
  }
  return j.dump(2) + "\n";
}

PolyModel poly_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  PolyModel model;
  for (const auto& d : j.at("dates")) {
    DateFit f;
    f.date_index = d.at("date_index").get<std::uint32_t>();
    f.time = d.at("time").get<double>();
    f.degree = d.at("degree").get<int>();
    f.center = d.at("center").get<double>();
    f.scale = d.at("scale").get<double>();
    f.coeffs = d.at("coeffs").get<std::vector<double>>();
    model.fits.push_back(std::move(f));
  }
  return model;
}

}  // namespace dml::lsmc
