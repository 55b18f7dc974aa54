#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "disco/common.hpp"
#include "disco/rng.hpp"

namespace disco::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Fully-connected net with ReLU hidden layers and an identity output layer.
// Rows are samples: layer l computes X * W[l] + b[l] (W is in x out).
struct Mlp {
  std::vector<MatrixXd> weights;
  std::vector<VectorXd> biases;
  // Bumped on every parameter mutation; forward caches carry the value they
  // saw so a stale backward is rejected.
  std::uint64_t version = 0;

  int layer_count() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return static_cast<int>(weights.front().rows()); }
  int output_dim() const { return static_cast<int>(weights.back().cols()); }
  std::size_t parameter_count() const;
};

// Hidden layers use uniform fan-in scaling; the final layer is drawn from
// [-final_scale, final_scale] to keep early outputs small.
Mlp make_mlp(const std::vector<int>& dims, Rng& rng, double final_scale = 3e-3);

struct MlpCache {
  const Mlp* net = nullptr;
  std::uint64_t version = 0;
  std::vector<MatrixXd> inputs;  // input of every layer (activations)
  std::vector<MatrixXd> pre;     // hidden pre-activations (for ReLU masks)
};

struct MlpGrads {
  std::vector<MatrixXd> weights;
  std::vector<VectorXd> biases;
};

MatrixXd forward_batch(const Mlp& net, const MatrixXd& x, MlpCache* cache = nullptr);

// Exact reverse-mode gradients for the cached forward pass. Also returns the
// gradient with respect to the input batch.
MlpGrads backward_batch(const MlpCache& cache, const MatrixXd& output_grad,
                        MatrixXd* input_grad = nullptr);

// Input gradient only; parameter gradients are skipped (used when a critic is
// differentiated with respect to the action).
MatrixXd backward_input_only(const MlpCache& cache, const MatrixXd& output_grad);

std::vector<double> mlp_forward(const Mlp& net, std::span<const double> input);

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<MatrixXd> m_weights, v_weights;
  std::vector<VectorXd> m_biases, v_biases;
  long step = 0;
};

AdamState make_adam(const Mlp& net, const AdamConfig& config = {});

// Bias-corrected Adam update; increments the step counter and the net version.
void adam_step(AdamState& state, Mlp& net, const MlpGrads& grads);

// Scalar-parameter Adam (used for the entropy temperature).
struct ScalarAdam {
  AdamConfig config;
  double m = 0.0;
  double v = 0.0;
  long step = 0;

  void update(double& parameter, double grad);
};

// --- squashed Gaussian policy head ---------------------------------------

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

struct SquashedSample {
  std::vector<double> action;    // strictly inside (-1, 1)
  std::vector<double> pre_tanh;  // u = mean + exp(log_std) * noise
  double log_prob = 0.0;
};

// action = tanh(mean + exp(log_std) * noise); log_prob is the Gaussian
// density of u with the per-dimension log(1 - tanh(u)^2) correction
// subtracted, computed via the stable identity
//   log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u)).
SquashedSample squashed_gaussian_sample(std::span<const double> mean,
                                        std::span<const double> log_std,
                                        std::span<const double> noise);

double log1m_tanh_sq(double u);

// --- checkpoint serialization (binary, bit-exact round trip) --------------

void save_mlp(std::ostream& out, const Mlp& net);
Mlp load_mlp(std::istream& in);
void save_adam(std::ostream& out, const AdamState& state);
AdamState load_adam(std::istream& in);

}  // namespace disco::nn
