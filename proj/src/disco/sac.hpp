#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>

#include "disco/nn.hpp"
#include "disco/replay.hpp"
#include "disco/rng.hpp"

namespace disco::sac {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using replay::TransitionBatch;

struct SacConfig {
  double gamma = 0.99;
  double tau = 0.001;
  double lr_q = 3e-4;
  double lr_policy = 3e-4;
  double lr_alpha = 3e-4;
  int batch_size = 256;
  // Entropy target; NaN means "use -action_dim" at agent construction.
  double target_entropy = std::numeric_limits<double>::quiet_NaN();
  double initial_log_alpha = 0.0;

  void validate() const;
};

// Twin critics with target copies, a squashed-Gaussian policy (its net emits
// [mean | raw log std]) and a learned temperature.
struct SacAgent {
  nn::Mlp policy;
  nn::Mlp q1, q2;
  nn::Mlp target_q1, target_q2;
  nn::AdamState opt_policy, opt_q1, opt_q2;
  double log_alpha = 0.0;
  nn::ScalarAdam opt_alpha;
  double target_entropy = 0.0;
  int augmented_dim = 0;
  int action_dim = 0;

  double alpha() const { return std::exp(log_alpha); }
};

SacAgent make_agent(int augmented_dim, int action_dim, const std::vector<int>& hidden,
                    Rng& init_rng, const SacConfig& config);

// y = r + gamma * (min(Q1', Q2')(s', a') - alpha * log pi(a'|s')) with a'
// freshly sampled from the current policy using `next_noise` (B x A standard
// normals). No terminal masking: episodes are fixed-horizon.
VectorXd td_target(const TransitionBatch& batch, const SacAgent& agent,
                   const SacConfig& config, const MatrixXd& next_noise);

inline double td_target_core(double reward, double min_q, double log_pi, double alpha,
                             double gamma) {
  return reward + gamma * (min_q - alpha * log_pi);
}

struct QLoss {
  double loss = 0.0;  // mean of the two per-critic MSEs
  nn::MlpGrads grads_q1;
  nn::MlpGrads grads_q2;
};

QLoss q_loss(const TransitionBatch& batch, const SacAgent& agent,
             const VectorXd& targets);

struct PolicyAlphaLoss {
  double policy_loss = 0.0;  // mean(alpha * log pi - min Q)
  double alpha_loss = 0.0;   // -log_alpha * mean(log pi + target_entropy)
  double alpha_grad = 0.0;   // d alpha_loss / d log_alpha
  double mean_log_pi = 0.0;
  nn::MlpGrads grads_policy;
};

// Reparameterized policy objective with `noise` (B x A standard normals)
// held fixed, so the analytic gradients are finite-difference checkable.
PolicyAlphaLoss policy_and_alpha_loss(const TransitionBatch& batch, const SacAgent& agent,
                                      const SacConfig& config, const MatrixXd& noise);

// target <- tau * online + (1 - tau) * target, elementwise.
void soft_update(SacAgent& agent, double tau);

enum class ActionMode { kStochastic, kDeterministic };

std::vector<double> select_action(const SacAgent& agent,
                                  std::span<const double> augmented_state,
                                  ActionMode mode, Rng& rng);

struct UpdateStats {
  double q_loss = 0.0;
  double policy_loss = 0.0;
  double alpha = 0.0;
};

// One full training step in the fixed order: critics, policy, temperature,
// target soft update.
UpdateStats update_step(SacAgent& agent, const TransitionBatch& batch,
                        const SacConfig& config, Rng& noise_rng);

// Checkpoint section: every network, optimizer state, temperature, entropy
// target and the config hash of the owning run.
void save_agent(std::ostream& out, const SacAgent& agent,
                const std::string& config_hash);
SacAgent load_agent(std::istream& in, std::string* config_hash = nullptr);

}  // namespace disco::sac
