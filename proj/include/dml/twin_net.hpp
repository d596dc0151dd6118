#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dml/instruments.hpp"

namespace dml::net {

// overflow-safe softplus G and its derivative G' (the logistic sigmoid)
inline double softplus(double u) {
  return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}
inline double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

struct Normalization {
  double mean_z = 0.0, std_z = 1.0;
  double mean_tau = 0.0, std_tau = 1.0;
  double mean_x = 0.0, std_x = 1.0;
  double std_q = 1.0;
};

Normalization fit_normalization(const instruments::TrainingSet& ts);

// Multi-layer perceptron parameters. Layer l maps the activated output u_l of
// layer l-1 through a_l = W_l^T u_l + b_l; the input feeds layer 1 unactivated
// and the last layer is linear. W_l is stored row-major as fan_in x fan_out.
struct NetParams {
  std::vector<int> sizes;     // e.g. {2, 20, 20, 20, 20, 1}
  std::vector<double> theta;  // W_1, b_1, W_2, b_2, ... flattened
  Normalization norm;

  int n_layers() const { return static_cast<int>(sizes.size()) - 1; }
  std::size_t n_params() const { return theta.size(); }
  std::size_t w_offset(int layer) const;
  std::size_t b_offset(int layer) const;
  double* w(int layer) { return theta.data() + w_offset(layer); }
  const double* w(int layer) const { return theta.data() + w_offset(layer); }
  double* b(int layer) { return theta.data() + b_offset(layer); }
  const double* b(int layer) const { return theta.data() + b_offset(layer); }
  void check_shapes() const;  // throws std::invalid_argument
};

// Xavier-normal weights (variance 2/(fan_in+fan_out)), zero biases.
NetParams init(const std::vector<int>& sizes, std::uint64_t seed);

// Scratch for the forward, twin and gradient passes of one sample. Reused
// across rows; each worker thread owns one.
struct Workspace {
  std::vector<std::vector<double>> a;      // pre-activations, a[0] = input
  std::vector<std::vector<double>> u;      // u[l] = G(a[l-1]) fed into layer l; u[1] = input
  std::vector<std::vector<double>> sig;    // sigmoid(a[l]) for hidden layers
  std::vector<std::vector<double>> abar;   // twin adjoints, abar[0] = input derivative
  std::vector<std::vector<double>> vbar;   // v_l = W_l abar_l
  std::vector<std::vector<double>> ga;     // reverse-pass d loss / d a_l
  std::vector<std::vector<double>> gatw;   // twin contribution to d loss / d a_l
  std::vector<double> gv;                  // temp
  std::vector<int> shape;
  bool has_forward = false;
  bool has_twin = false;
  void ensure(const NetParams& p);
};

struct TwinOutput {
  double y_norm = 0.0;
  double y = 0.0;  // de-normalized price prediction
  double dy_dz_norm = 0.0;
  double dy_dz = 0.0;  // de-normalized delta prediction
};

// Feed-forward pass (value only); caches activations in ws for the twin and
// gradient passes. Inputs are raw (z, tau); normalization comes from params.
TwinOutput forward(const NetParams& p, double z, double tau, Workspace& ws);

// Adjoint pass over the cached activations; fills the derivative fields.
TwinOutput twin_backward(const NetParams& p, const TwinOutput& fw, Workspace& ws);

// forward + twin_backward in one call
TwinOutput predict(const NetParams& p, double z, double tau, Workspace& ws);

// Generic-width variants used by tests: input is already normalized.
double forward_vec(const NetParams& p, std::span<const double> input, Workspace& ws);
void twin_backward_vec(const NetParams& p, Workspace& ws, std::span<double> input_grad);

// Combined training loss on the given rows, computed in normalized space:
// mean((x~ - y~)^2) + lambda * mean(((q - dy_raw)/std_q)^2).
double loss(const NetParams& p, const instruments::TrainingSet& ts,
            std::span<const std::uint32_t> rows, double lambda);

// Exact gradient of loss() w.r.t. theta, derivative term included. Per-row
// gradients are combined by a fixed pairwise tree, so the result does not
// depend on the thread count.
std::vector<double> param_gradients(const NetParams& p, const instruments::TrainingSet& ts,
                                    std::span<const std::uint32_t> rows, double lambda);
std::vector<double> param_gradients_serial(const NetParams& p, const instruments::TrainingSet& ts,
                                           std::span<const std::uint32_t> rows, double lambda);

struct LrSchedule {
  double base = 1e-2;
  // (epoch, factor): the factor applies from that epoch on
  std::vector<std::pair<int, double>> decays = {{60, 0.1}, {90, 0.1}};
  double at(int epoch) const;
};

struct TrainConfig {
  double lambda = 1.0;  // derivative-loss weight; 0 recovers the value-only regression
  int epochs = 100;
  int batch_size = 256;
  LrSchedule lr;
  std::uint64_t seed = 0;
  int hidden_width = 20;
  int hidden_layers = 4;
  void validate() const;
};

struct TrainResult {
  NetParams params;
  std::vector<double> loss_history;  // [0] = before training, then one entry per epoch
};

// Adam (beta1=0.9, beta2=0.999, eps=1e-8) over shuffled minibatches.
// Deterministic given (ts, cfg); throws on divergence naming the epoch.
TrainResult train(const instruments::TrainingSet& ts, const TrainConfig& cfg);

// CSV dump of the loss history, header: epoch,loss
void dump_loss_csv(std::span<const double> history, std::ostream& out);

std::string net_to_json(const NetParams& p, const TrainConfig* cfg = nullptr);
NetParams net_from_json(const std::string& text);

}  // namespace dml::net
