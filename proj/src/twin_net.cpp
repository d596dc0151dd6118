#include "dml/twin_net.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dml/io.hpp"
#include "dml/reduce.hpp"
#include "dml/rng.hpp"

namespace dml::net {

Normalization fit_normalization(const instruments::TrainingSet& ts) {
  if (ts.size() == 0) throw std::invalid_argument("fit_normalization: empty training set");
  auto std_or_one = [](double var) { return var > 0.0 ? std::sqrt(var) : 1.0; };
  Normalization n;
  const auto z = reduce::mean_var(ts.z);
  const auto t = reduce::mean_var(ts.tau);
  const auto x = reduce::mean_var(ts.x);
  const auto q = reduce::mean_var(ts.q);
  n.mean_z = z.mean;
  n.std_z = std_or_one(z.var);
  n.mean_tau = t.mean;
  n.std_tau = std_or_one(t.var);
  n.mean_x = x.mean;
  n.std_x = std_or_one(x.var);
  n.std_q = std_or_one(q.var);  // scale only, no centering
  return n;
}

std::size_t NetParams::w_offset(int layer) const {
  std::size_t off = 0;
  for (int l = 1; l < layer; ++l)
    off += static_cast<std::size_t>(sizes[l - 1]) * sizes[l] + sizes[l];
  return off;
}

std::size_t NetParams::b_offset(int layer) const {
  return w_offset(layer) + static_cast<std::size_t>(sizes[layer - 1]) * sizes[layer];
}

void NetParams::check_shapes() const {
  if (sizes.size() < 2) throw std::invalid_argument("NetParams: need at least one layer");
  for (int s : sizes)
    if (s < 1) throw std::invalid_argument("NetParams: layer sizes must be positive");
  std::size_t expect = 0;
  for (std::size_t l = 1; l < sizes.size(); ++l)
    expect += static_cast<std::size_t>(sizes[l - 1]) * sizes[l] + sizes[l];
  if (theta.size() != expect) throw std::invalid_argument("NetParams: parameter count mismatch");
  for (double v : theta)
    if (!std::isfinite(v)) throw std::invalid_argument("NetParams: non-finite parameter");
  if (!(norm.std_z > 0.0) || !(norm.std_tau > 0.0) || !(norm.std_x > 0.0) || !(norm.std_q > 0.0))
    throw std::invalid_argument("NetParams: normalization stds must be positive");
}

NetParams init(const std::vector<int>& sizes, std::uint64_t seed) {
  NetParams p;
  p.sizes = sizes;
  std::size_t count = 0;
  if (sizes.size() < 2) throw std::invalid_argument("init: need at least one layer");
  for (std::size_t l = 1; l < sizes.size(); ++l)
    count += static_cast<std::size_t>(sizes[l - 1]) * sizes[l] + sizes[l];
  p.theta.assign(count, 0.0);
  rng::NormalStream gen(seed, 0);
  for (int l = 1; l <= p.n_layers(); ++l) {
    const int fan_in = sizes[l - 1];
    const int fan_out = sizes[l];
    const double sd = std::sqrt(2.0 / (fan_in + fan_out));
    double* w = p.w(l);
    for (int i = 0; i < fan_in * fan_out; ++i) w[i] = sd * gen.normal();
    // biases stay zero
  }
  p.check_shapes();
  return p;
}

void Workspace::ensure(const NetParams& p) {
  if (shape == p.sizes) return;
  shape = p.sizes;
  const int L = p.n_layers();
  a.assign(L + 1, {});
  u.assign(L + 1, {});
  sig.assign(L, {});
  abar.assign(L + 1, {});
  vbar.assign(L + 1, {});
  ga.assign(L + 1, {});
  gatw.assign(L, {});
  a[0].resize(shape[0]);
  std::size_t widest = 0;
  for (int l = 1; l <= L; ++l) {
    a[l].resize(shape[l]);
    u[l].resize(shape[l - 1]);
    abar[l].resize(shape[l]);
    vbar[l].resize(shape[l - 1]);
    ga[l].resize(shape[l]);
    widest = std::max(widest, static_cast<std::size_t>(shape[l - 1]));
  }
  for (int l = 1; l < L; ++l) {
    sig[l].resize(shape[l]);
    gatw[l].resize(shape[l]);
  }
  abar[0].resize(shape[0]);
  gv.resize(widest);
  has_forward = has_twin = false;
}

double forward_vec(const NetParams& p, std::span<const double> input, Workspace& ws) {
  ws.ensure(p);
  const int L = p.n_layers();
  if (static_cast<int>(input.size()) != p.sizes[0])
    throw std::invalid_argument("forward: input width mismatch");
  std::copy(input.begin(), input.end(), ws.a[0].begin());
  std::copy(input.begin(), input.end(), ws.u[1].begin());
  for (int l = 1; l <= L; ++l) {
    if (l >= 2)
      for (int i = 0; i < p.sizes[l - 1]; ++i) ws.u[l][i] = softplus(ws.a[l - 1][i]);
    const double* W = p.w(l);
    const double* B = p.b(l);
    const int in = p.sizes[l - 1];
    const int out = p.sizes[l];
    for (int j = 0; j < out; ++j) ws.a[l][j] = B[j];
    for (int i = 0; i < in; ++i) {
      const double ui = ws.u[l][i];
      const double* row = W + static_cast<std::size_t>(i) * out;
      for (int j = 0; j < out; ++j) ws.a[l][j] += row[j] * ui;
    }
  }
  const double y = ws.a[L][0];
  if (!std::isfinite(y)) {
    int bad = 0;
    for (int l = 1; l <= L && bad == 0; ++l)
      for (int j = 0; j < p.sizes[l]; ++j)
        if (!std::isfinite(ws.a[l][j])) {
          bad = l;
          break;
        }
    throw std::runtime_error("forward: non-finite activation at layer " + std::to_string(bad));
  }
  ws.has_forward = true;
  ws.has_twin = false;
  return y;
}

void twin_backward_vec(const NetParams& p, Workspace& ws, std::span<double> input_grad) {
  ws.ensure(p);
  if (!ws.has_forward)
    throw std::logic_error("twin_backward: no cached forward pass in this workspace");
  const int L = p.n_layers();
  // abar_L = 1, then abar_{l-1} = (W_l abar_l) o G'(a_{l-1}); the input layer
  // enters unactivated so abar_0 = W_1 abar_1.
  std::fill(ws.abar[L].begin(), ws.abar[L].end(), 0.0);
  ws.abar[L][0] = 1.0;
  for (int l = L; l >= 1; --l) {
    const double* W = p.w(l);
    const int in = p.sizes[l - 1];
    const int out = p.sizes[l];
    for (int i = 0; i < in; ++i) {
      const double* row = W + static_cast<std::size_t>(i) * out;
      double acc = 0.0;
      for (int j = 0; j < out; ++j) acc += row[j] * ws.abar[l][j];
      ws.vbar[l][i] = acc;
    }
    if (l >= 2) {
      for (int i = 0; i < in; ++i) {
        ws.sig[l - 1][i] = sigmoid(ws.a[l - 1][i]);
        ws.abar[l - 1][i] = ws.vbar[l][i] * ws.sig[l - 1][i];
      }
    } else {
      for (int i = 0; i < in; ++i) ws.abar[0][i] = ws.vbar[1][i];
    }
  }
  ws.has_twin = true;
  if (!input_grad.empty()) {
    if (static_cast<int>(input_grad.size()) != p.sizes[0])
      throw std::invalid_argument("twin_backward: input_grad width mismatch");
    std::copy(ws.abar[0].begin(), ws.abar[0].end(), input_grad.begin());
  }
}

TwinOutput forward(const NetParams& p, double z, double tau, Workspace& ws) {
  const double in[2] = {(z - p.norm.mean_z) / p.norm.std_z, (tau - p.norm.mean_tau) / p.norm.std_tau};
  if (p.sizes[0] != 2) throw std::invalid_argument("forward: net does not take (z, tau) inputs");
  TwinOutput o;
  o.y_norm = forward_vec(p, in, ws);
  o.y = o.y_norm * p.norm.std_x + p.norm.mean_x;
  return o;
}

TwinOutput twin_backward(const NetParams& p, const TwinOutput& fw, Workspace& ws) {
  TwinOutput o = fw;
  twin_backward_vec(p, ws, {});
  o.dy_dz_norm = ws.abar[0][0];
  o.dy_dz = o.dy_dz_norm * p.norm.std_x / p.norm.std_z;
  return o;
}

TwinOutput predict(const NetParams& p, double z, double tau, Workspace& ws) {
  return twin_backward(p, forward(p, z, tau, ws), ws);
}

namespace {

// Loss contribution of one row and, when grad != nullptr, the gradient of that
// contribution w.r.t. every parameter. The derivative term needs the reverse
// pass differentiated again: the twin recursion is swept bottom-up first
// (collecting its own weight terms and the G'' = sigmoid' contributions to
// d loss/d a_l), then the usual top-down value sweep folds those in.
double row_eval(const NetParams& p, double z, double tau, double x, double q, double lambda,
                Workspace& ws, double* grad) {
  const Normalization& nm = p.norm;
  TwinOutput out = predict(p, z, tau, ws);

  const double x_norm = (x - nm.mean_x) / nm.std_x;
  const double r_value = out.y_norm - x_norm;
  const double r_deriv = (out.dy_dz - q) / nm.std_q;
  const double contrib = r_value * r_value + lambda * r_deriv * r_deriv;
  if (grad == nullptr) return contrib;

  const int L = p.n_layers();
  const double g_y = 2.0 * r_value;
  // d loss / d abar_0[0], chained through dy_dz = abar_0[0] * std_x / std_z
  const double g_delta = 2.0 * lambda * r_deriv * (nm.std_x / nm.std_z) / nm.std_q;

  // --- twin sweep, bottom-up (reverse of the adjoint recursion) ---
  // layer 1: vbar_1 = W_1 abar_1 and abar_0 = vbar_1; only the spot component
  // of abar_0 reaches the loss.
  {
    const double* W = p.w(1);
    double* gW = grad + p.w_offset(1);
    const int out_w = p.sizes[1];
    ws.gv[0] = g_delta;  // g vbar_1, nonzero only at the spot input
    for (int j = 0; j < out_w; ++j) {
      gW[j] += g_delta * ws.abar[1][j];  // row i=0 of W_1
      ws.ga[1][j] = g_delta * W[j];      // g abar_1 (reused as carrier)
    }
    for (int l = 1; l < L; ++l) std::fill(ws.gatw[l].begin(), ws.gatw[l].end(), 0.0);
  }
  // layers 2..L: abar_{l-1} = vbar_l o sig_{l-1}, vbar_l = W_l abar_l
  for (int l = 2; l <= L; ++l) {
    const int in = p.sizes[l - 1];
    const int out_w = p.sizes[l];
    const double* W = p.w(l);
    double* gW = grad + p.w_offset(l);
    // ws.ga[l-1] currently holds g abar_{l-1}
    for (int i = 0; i < in; ++i) {
      const double g_abar = ws.ga[l - 1][i];
      const double s = ws.sig[l - 1][i];
      ws.gv[i] = g_abar * s;
      ws.gatw[l - 1][i] = g_abar * ws.vbar[l][i] * s * (1.0 - s);
    }
    for (int j = 0; j < out_w; ++j) ws.ga[l][j] = 0.0;
    for (int i = 0; i < in; ++i) {
      const double gvi = ws.gv[i];
      const double* row = W + static_cast<std::size_t>(i) * out_w;
      double* gRow = gW + static_cast<std::size_t>(i) * out_w;
      for (int j = 0; j < out_w; ++j) {
        gRow[j] += gvi * ws.abar[l][j];
        if (l < L) ws.ga[l][j] += row[j] * gvi;  // g abar_l; abar_L is constant
      }
    }
  }

  // --- value sweep, top-down; fold in the twin contributions gatw ---
  std::fill(ws.ga[L].begin(), ws.ga[L].end(), 0.0);
  ws.ga[L][0] = g_y;
  for (int l = L; l >= 1; --l) {
    const int in = p.sizes[l - 1];
    const int out_w = p.sizes[l];
    double* gW = grad + p.w_offset(l);
    double* gB = grad + p.b_offset(l);
    const double* W = p.w(l);
    for (int j = 0; j < out_w; ++j) gB[j] += ws.ga[l][j];
    for (int i = 0; i < in; ++i) {
      const double ui = ws.u[l][i];
      const double* row = W + static_cast<std::size_t>(i) * out_w;
      double* gRow = gW + static_cast<std::size_t>(i) * out_w;
      double g_u = 0.0;
      for (int j = 0; j < out_w; ++j) {
        const double gaj = ws.ga[l][j];
        gRow[j] += ui * gaj;
        g_u += row[j] * gaj;
      }
      if (l >= 2) ws.ga[l - 1][i] = ws.gatw[l - 1][i] + g_u * ws.sig[l - 1][i];
    }
  }
  return contrib;
}

void check_rows(const instruments::TrainingSet& ts, std::span<const std::uint32_t> rows) {
  if (rows.empty()) throw std::invalid_argument("twin_net: empty batch");
  for (std::uint32_t r : rows)
    if (r >= ts.size()) throw std::out_of_range("twin_net: row index out of range");
}

constexpr std::size_t kBlockRows = 1024;

std::vector<double> gradients_impl(const NetParams& p, const instruments::TrainingSet& ts,
                                   std::span<const std::uint32_t> rows, double lambda,
                                   bool parallel) {
  check_rows(ts, rows);
  p.check_shapes();
  const std::size_t np = p.n_params();
  const std::size_t n = rows.size();
  const std::size_t block = std::min(n, kBlockRows);
  std::vector<double> buffer(block * np);
  std::vector<double> block_sums;

  std::string error;
  for (std::size_t start = 0; start < n; start += block) {
    const std::size_t count = std::min(block, n - start);
    std::fill(buffer.begin(), buffer.begin() + count * np, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(count); ++k) {
      static thread_local Workspace ws;
      const std::uint32_t r = rows[start + static_cast<std::size_t>(k)];
      try {
        row_eval(p, ts.z[r], ts.tau[r], ts.x[r], ts.q[r], lambda, ws,
                 buffer.data() + static_cast<std::size_t>(k) * np);
      } catch (const std::exception& e) {
#ifdef _OPENMP
#pragma omp critical
#endif
        if (error.empty()) error = e.what();
      }
    }
    if (!error.empty()) throw std::runtime_error(error);
    reduce::pairwise_rows(buffer.data(), count, np, parallel);
    block_sums.insert(block_sums.end(), buffer.begin(), buffer.begin() + np);
  }

  const std::size_t n_blocks = block_sums.size() / np;
  reduce::pairwise_rows(block_sums.data(), n_blocks, np, false);
  std::vector<double> grad(block_sums.begin(), block_sums.begin() + np);
  const double inv = 1.0 / static_cast<double>(n);
  for (double& g : grad) g *= inv;
  return grad;
}

}  // namespace

double loss(const NetParams& p, const instruments::TrainingSet& ts,
            std::span<const std::uint32_t> rows, double lambda) {
  check_rows(ts, rows);
  p.check_shapes();
  const std::size_t n = rows.size();
  std::vector<double> per_row(n);
  std::string error;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(n); ++k) {
    static thread_local Workspace ws;
    const std::uint32_t r = rows[static_cast<std::size_t>(k)];
    try {
      per_row[static_cast<std::size_t>(k)] =
          row_eval(p, ts.z[r], ts.tau[r], ts.x[r], ts.q[r], lambda, ws, nullptr);
    } catch (const std::exception& e) {
#ifdef _OPENMP
#pragma omp critical
#endif
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw std::runtime_error(error);
  return reduce::pairwise_sum(per_row) / static_cast<double>(n);
}

std::vector<double> param_gradients(const NetParams& p, const instruments::TrainingSet& ts,
                                    std::span<const std::uint32_t> rows, double lambda) {
  return gradients_impl(p, ts, rows, lambda, true);
}

std::vector<double> param_gradients_serial(const NetParams& p, const instruments::TrainingSet& ts,
                                           std::span<const std::uint32_t> rows, double lambda) {
  return gradients_impl(p, ts, rows, lambda, false);
}

double LrSchedule::at(int epoch) const {
  double lr = base;
  for (const auto& [from, factor] : decays)
    if (epoch >= from) lr *= factor;
  return lr;
}

void TrainConfig::validate() const {
  if (lambda < 0.0) throw std::invalid_argument("TrainConfig: lambda must be non-negative");
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be at least 1");
  if (hidden_width < 1 || hidden_layers < 1)
    throw std::invalid_argument("TrainConfig: hidden architecture must be non-empty");
  if (!(lr.base > 0.0)) throw std::invalid_argument("TrainConfig: learning rate must be positive");
}

TrainResult train(const instruments::TrainingSet& ts, const TrainConfig& cfg) {
  cfg.validate();
  if (ts.size() < static_cast<std::size_t>(cfg.batch_size))
    throw std::invalid_argument("train: fewer rows than batch_size");

  std::vector<int> sizes;
  sizes.push_back(2);
  for (int l = 0; l < cfg.hidden_layers; ++l) sizes.push_back(cfg.hidden_width);
  sizes.push_back(1);

  NetParams p = init(sizes, rng::label_seed(cfg.seed, "net.init"));
  p.norm = fit_normalization(ts);

  std::vector<std::uint32_t> all_rows(ts.size());
  for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = static_cast<std::uint32_t>(i);
  std::vector<std::uint32_t> order = all_rows;

  const std::size_t np = p.n_params();
  std::vector<double> m(np, 0.0), v(np, 0.0);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double beta1_t = 1.0, beta2_t = 1.0;

  TrainResult result;
  result.loss_history.push_back(loss(p, ts, all_rows, cfg.lambda));

  const std::uint64_t shuffle_seed = rng::label_seed(cfg.seed, "net.shuffle");
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr.at(epoch);
    rng::NormalStream shuffle(shuffle_seed, static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i-- > 1;)
      std::swap(order[i], order[shuffle.below(i + 1)]);

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      std::vector<double> grad;
      try {
        grad = param_gradients(p, ts, {order.data() + start, count}, cfg.lambda);
      } catch (const std::exception& e) {
        throw std::runtime_error("train: diverged at epoch " + std::to_string(epoch) + ": " +
                                 e.what());
      }
      beta1_t *= beta1;
      beta2_t *= beta2;
      for (std::size_t i = 0; i < np; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / (1.0 - beta1_t);
        const double v_hat = v[i] / (1.0 - beta2_t);
        p.theta[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
      }
    }

    const double epoch_loss = loss(p, ts, all_rows, cfg.lambda);
    if (!std::isfinite(epoch_loss))
      throw std::runtime_error("train: diverged (non-finite loss) at epoch " +
                               std::to_string(epoch));
    result.loss_history.push_back(epoch_loss);
  }

  result.params = std::move(p);
  return result;
}

void dump_loss_csv(std::span<const double> history, std::ostream& out) {
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < history.size(); ++e)
    out << e << ',' << io::fmt(history[e]) << '\n';
}

std::string net_to_json(const NetParams& p, const TrainConfig* cfg) {
  nlohmann::ordered_json j;
  j["model"] = "twin_net";
  j["layer_sizes"] = p.sizes;
  auto weights = nlohmann::ordered_json::array();
  auto biases = nlohmann::ordered_json::array();
  for (int l = 1; l <= p.n_layers(); ++l) {
    const std::size_t nw = static_cast<std::size_t>(p.sizes[l - 1]) * p.sizes[l];
    weights.push_back(std::vector<double>(p.w(l), p.w(l) + nw));
    biases.push_back(std::vector<double>(p.b(l), p.b(l) + p.sizes[l]));
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  j["normalization"] = {{"mean_z", p.norm.mean_z},   {"std_z", p.norm.std_z},
                        {"mean_tau", p.norm.mean_tau}, {"std_tau", p.norm.std_tau},
                        {"mean_x", p.norm.mean_x},   {"std_x", p.norm.std_x},
                        {"std_q", p.norm.std_q}};
  if (cfg != nullptr) {
    j["config"] = {{"lambda", cfg->lambda},
                   {"epochs", cfg->epochs},
                   {"batch_size", cfg->batch_size},
                   {"learning_rate", cfg->lr.base},
                   {"hidden_width", cfg->hidden_width},
                   {"hidden_layers", cfg->hidden_layers}};
    j["seed"] = cfg->seed;
  }
  return j.dump(2) + "\n";
}

NetParams net_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  NetParams p;
  p.sizes = j.at("layer_sizes").get<std::vector<int>>();
  std::size_t count = 0;
  for (std::size_t l = 1; l < p.sizes.size(); ++l)
    count += static_cast<std::size_t>(p.sizes[l - 1]) * p.sizes[l] + p.sizes[l];
  p.theta.assign(count, 0.0);
  const auto& weights = j.at("weights");
  const auto& biases = j.at("biases");
  for (int l = 1; l <= p.n_layers(); ++l) {
    const auto w = weights.at(l - 1).get<std::vector<double>>();
    const auto b = biases.at(l - 1).get<std::vector<double>>();
    std::copy(w.begin(), w.end(), p.w(l));
    std::copy(b.begin(), b.end(), p.b(l));
  }
  const auto& nm = j.at("normalization");
  p.norm.mean_z = nm.at("mean_z").get<double>();
  p.norm.std_z = nm.at("std_z").get<double>();
  p.norm.mean_tau = nm.at("mean_tau").get<double>();
  p.norm.std_tau = nm.at("std_tau").get<double>();
  p.norm.mean_x = nm.at("mean_x").get<double>();
  p.norm.std_x = nm.at("std_x").get<double>();
  p.norm.std_q = nm.at("std_q").get<double>();
  p.check_shapes();
  return p;
}

}  // namespace dml::net
