#include "disco/sac.hpp"

#include <cmath>
#include <istream>
#include <ostream>

namespace disco::sac {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;
constexpr double kActionBound = 1.0 - 1e-12;

struct PolicyEval {
  MatrixXd mean;
  MatrixXd log_std;    // after clamping
  MatrixXd clamp_mask; // 1 where the raw head was inside the clamp range
  nn::MlpCache cache;  // filled only when a backward pass will follow
};

PolicyEval eval_policy(const nn::Mlp& policy, const MatrixXd& states, int action_dim,
                       bool want_cache) {
  PolicyEval eval;
  const MatrixXd out =
      nn::forward_batch(policy, states, want_cache ? &eval.cache : nullptr);
  eval.mean = out.leftCols(action_dim);
  const MatrixXd raw = out.rightCols(action_dim);
  eval.log_std = raw.cwiseMax(nn::kLogStdMin).cwiseMin(nn::kLogStdMax);
  eval.clamp_mask = ((raw.array() > nn::kLogStdMin) && (raw.array() < nn::kLogStdMax))
                        .cast<double>()
                        .matrix();
  return eval;
}

struct SampledActions {
  MatrixXd pre_tanh;   // u = mean + sigma * eps
  MatrixXd actions;    // tanh(u), clamped strictly inside (-1, 1)
  MatrixXd one_minus_tanh_sq;
  VectorXd log_pi;
};

SampledActions sample_actions(const PolicyEval& eval, const MatrixXd& noise) {
  SampledActions s;
  const MatrixXd sigma = eval.log_std.array().exp().matrix();
  s.pre_tanh = eval.mean + sigma.cwiseProduct(noise);
  s.actions = s.pre_tanh.array().tanh().cwiseMax(-kActionBound).cwiseMin(kActionBound);
  s.one_minus_tanh_sq.resize(s.pre_tanh.rows(), s.pre_tanh.cols());
  s.log_pi = VectorXd::Zero(s.pre_tanh.rows());
  for (int i = 0; i < s.pre_tanh.rows(); ++i) {
    double lp = 0.0;
    for (int d = 0; d < s.pre_tanh.cols(); ++d) {
      const double log_sq = nn::log1m_tanh_sq(s.pre_tanh(i, d));
      s.one_minus_tanh_sq(i, d) = std::exp(log_sq);
      lp += -0.5 * noise(i, d) * noise(i, d) - eval.log_std(i, d) - kHalfLog2Pi;
      lp -= log_sq;
    }
    s.log_pi(i) = lp;
  }
  return s;
}

MatrixXd concat_cols(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

}  // namespace

void SacConfig::validate() const {
  require(gamma >= 0.0 && gamma < 1.0, ErrorCode::ConfigError, "gamma outside [0,1)");
  require(tau > 0.0 && tau <= 1.0, ErrorCode::ConfigError, "tau outside (0,1]");
  require(batch_size >= 1, ErrorCode::ConfigError, "batch size must be positive");
}

SacAgent make_agent(int augmented_dim, int action_dim, const std::vector<int>& hidden,
                    Rng& init_rng, const SacConfig& config) {
  require(augmented_dim >= 1 && action_dim >= 1, ErrorCode::InvalidArgument,
          "agent dimensions must be positive");
  SacAgent agent;
  agent.augmented_dim = augmented_dim;
  agent.action_dim = action_dim;

  std::vector<int> policy_dims{augmented_dim};
  std::vector<int> q_dims{augmented_dim + action_dim};
  for (int h : hidden) {
    policy_dims.push_back(h);
    q_dims.push_back(h);
  }
  policy_dims.push_back(2 * action_dim);
  q_dims.push_back(1);

  agent.policy = nn::make_mlp(policy_dims, init_rng);
  agent.q1 = nn::make_mlp(q_dims, init_rng);
  agent.q2 = nn::make_mlp(q_dims, init_rng);
  agent.target_q1 = agent.q1;
  agent.target_q2 = agent.q2;

  agent.opt_policy = nn::make_adam(agent.policy, {.learning_rate = config.lr_policy});
  agent.opt_q1 = nn::make_adam(agent.q1, {.learning_rate = config.lr_q});
  agent.opt_q2 = nn::make_adam(agent.q2, {.learning_rate = config.lr_q});
  agent.opt_alpha.config.learning_rate = config.lr_alpha;
  agent.log_alpha = config.initial_log_alpha;
  agent.target_entropy = std::isnan(config.target_entropy)
                             ? -static_cast<double>(action_dim)
                             : config.target_entropy;
  return agent;
}

VectorXd td_target(const TransitionBatch& batch, const SacAgent& agent,
                   const SacConfig& config, const MatrixXd& next_noise) {
  require(next_noise.rows() == batch.size() && next_noise.cols() == agent.action_dim,
          ErrorCode::ShapeMismatch, "next-action noise shape mismatch");
  const PolicyEval eval =
      eval_policy(agent.policy, batch.augmented_next, agent.action_dim,
                  /*want_cache=*/false);
  const SampledActions next = sample_actions(eval, next_noise);

  const MatrixXd q_in = concat_cols(batch.augmented_next, next.actions);
  const MatrixXd q1v = nn::forward_batch(agent.target_q1, q_in);
  const MatrixXd q2v = nn::forward_batch(agent.target_q2, q_in);

  const double alpha = agent.alpha();
  VectorXd targets(batch.size());
  for (int i = 0; i < batch.size(); ++i)
    targets(i) = td_target_core(batch.rewards(i), std::min(q1v(i, 0), q2v(i, 0)),
                                next.log_pi(i), alpha, config.gamma);
  return targets;
}

QLoss q_loss(const TransitionBatch& batch, const SacAgent& agent,
             const VectorXd& targets) {
  require(targets.size() == batch.size(), ErrorCode::ShapeMismatch,
          "target count does not match the batch");
  const MatrixXd q_in = concat_cols(batch.augmented_obs, batch.actions);
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  QLoss out;
  nn::MlpCache cache1, cache2;
  const MatrixXd q1v = nn::forward_batch(agent.q1, q_in, &cache1);
  const MatrixXd q2v = nn::forward_batch(agent.q2, q_in, &cache2);

  const VectorXd err1 = q1v.col(0) - targets;
  const VectorXd err2 = q2v.col(0) - targets;
  // Reported scalar is the mean of the two per-critic MSEs.
  out.loss = 0.5 * inv_b * (err1.squaredNorm() + err2.squaredNorm());

  const MatrixXd dq1 = err1 * inv_b;  // d(0.5*mse1)/dq1
  const MatrixXd dq2 = err2 * inv_b;
  out.grads_q1 = nn::backward_batch(cache1, dq1);
  out.grads_q2 = nn::backward_batch(cache2, dq2);
  return out;
}

PolicyAlphaLoss policy_and_alpha_loss(const TransitionBatch& batch, const SacAgent& agent,
                                      const SacConfig& config, const MatrixXd& noise) {
  (void)config;
  require(noise.rows() == batch.size() && noise.cols() == agent.action_dim,
          ErrorCode::ShapeMismatch, "policy noise shape mismatch");
  const int b = batch.size();
  const int a_dim = agent.action_dim;
  const double inv_b = 1.0 / static_cast<double>(b);
  const double alpha = agent.alpha();

  PolicyEval eval =
      eval_policy(agent.policy, batch.augmented_obs, a_dim, /*want_cache=*/true);
  const SampledActions sampled = sample_actions(eval, noise);

  const MatrixXd q_in = concat_cols(batch.augmented_obs, sampled.actions);
  nn::MlpCache cache1, cache2;
  const MatrixXd q1v = nn::forward_batch(agent.q1, q_in, &cache1);
  const MatrixXd q2v = nn::forward_batch(agent.q2, q_in, &cache2);

  PolicyAlphaLoss out;
  VectorXd min_q(b);
  MatrixXd pick1 = MatrixXd::Zero(b, 1);
  MatrixXd pick2 = MatrixXd::Zero(b, 1);
  for (int i = 0; i < b; ++i) {
    if (q1v(i, 0) <= q2v(i, 0)) {
      min_q(i) = q1v(i, 0);
      pick1(i, 0) = -inv_b;  // d policy_loss / d q1(i)
    } else {
      min_q(i) = q2v(i, 0);
      pick2(i, 0) = -inv_b;
    }
  }
  out.policy_loss = inv_b * (alpha * sampled.log_pi.sum() - min_q.sum());
  out.mean_log_pi = inv_b * sampled.log_pi.sum();

  // dL/da via the active critic only; parameter gradients are not needed.
  const MatrixXd dq_in1 = nn::backward_input_only(cache1, pick1);
  const MatrixXd dq_in2 = nn::backward_input_only(cache2, pick2);
  const MatrixXd dl_da =
      dq_in1.rightCols(a_dim) + dq_in2.rightCols(a_dim);

  // Chain through a = tanh(u) and the log-density terms:
  //   dL/du = dL/da * (1 - tanh(u)^2) + (alpha/B) * 2 tanh(u)
  //   dL/d log_std = dL/du * sigma * eps - alpha/B
  const MatrixXd tanh_u = sampled.pre_tanh.array().tanh().matrix();
  const MatrixXd dl_du =
      dl_da.cwiseProduct(sampled.one_minus_tanh_sq) +
      (2.0 * alpha * inv_b) * tanh_u;
  const MatrixXd sigma = eval.log_std.array().exp().matrix();
  MatrixXd dl_dlogstd =
      dl_du.cwiseProduct(sigma.cwiseProduct(noise));
  dl_dlogstd.array() -= alpha * inv_b;
  // Zero gradient where the raw head was outside the clamp range.
  dl_dlogstd = dl_dlogstd.cwiseProduct(eval.clamp_mask);

  MatrixXd head_grad(b, 2 * a_dim);
  head_grad << dl_du, dl_dlogstd;
  out.grads_policy = nn::backward_batch(eval.cache, head_grad);

  out.alpha_grad = -(out.mean_log_pi + agent.target_entropy);
  out.alpha_loss = -agent.log_alpha * (out.mean_log_pi + agent.target_entropy);
  return out;
}

void soft_update(SacAgent& agent, double tau) {
  require(tau >= 0.0 && tau <= 1.0, ErrorCode::InvalidArgument, "tau outside [0,1]");
  auto blend = [tau](nn::Mlp& target, const nn::Mlp& online) {
    for (int l = 0; l < target.layer_count(); ++l) {
      target.weights[l] = tau * online.weights[l] + (1.0 - tau) * target.weights[l];
      target.biases[l] = tau * online.biases[l] + (1.0 - tau) * target.biases[l];
    }
    target.version += 1;
  };
  blend(agent.target_q1, agent.q1);
  blend(agent.target_q2, agent.q2);
}

std::vector<double> select_action(const SacAgent& agent,
                                  std::span<const double> augmented_state,
                                  ActionMode mode, Rng& rng) {
  require(static_cast<int>(augmented_state.size()) == agent.augmented_dim,
          ErrorCode::DimensionMismatch, "augmented state width mismatch");
  const std::vector<double> head = nn::mlp_forward(agent.policy, augmented_state);
  const int a_dim = agent.action_dim;
  std::vector<double> mean(head.begin(), head.begin() + a_dim);
  std::vector<double> log_std(head.begin() + a_dim, head.end());
  std::vector<double> noise(a_dim, 0.0);
  if (mode == ActionMode::kStochastic)
    for (double& n : noise) n = rng.normal();
  return nn::squashed_gaussian_sample(mean, log_std, noise).action;
}

UpdateStats update_step(SacAgent& agent, const TransitionBatch& batch,
                        const SacConfig& config, Rng& noise_rng) {
  const int b = batch.size();
  const int a_dim = agent.action_dim;
  MatrixXd next_noise(b, a_dim);
  for (int i = 0; i < b; ++i)
    for (int d = 0; d < a_dim; ++d) next_noise(i, d) = noise_rng.normal();
  MatrixXd policy_noise(b, a_dim);
  for (int i = 0; i < b; ++i)
    for (int d = 0; d < a_dim; ++d) policy_noise(i, d) = noise_rng.normal();

  UpdateStats stats;
  const VectorXd targets = td_target(batch, agent, config, next_noise);
  QLoss q = q_loss(batch, agent, targets);
  stats.q_loss = q.loss;
  nn::adam_step(agent.opt_q1, agent.q1, q.grads_q1);
  nn::adam_step(agent.opt_q2, agent.q2, q.grads_q2);

  PolicyAlphaLoss pi = policy_and_alpha_loss(batch, agent, config, policy_noise);
  stats.policy_loss = pi.policy_loss;
  nn::adam_step(agent.opt_policy, agent.policy, pi.grads_policy);

  agent.opt_alpha.update(agent.log_alpha, pi.alpha_grad);
  stats.alpha = agent.alpha();

  soft_update(agent, config.tau);
  return stats;
}

void save_agent(std::ostream& out, const SacAgent& agent,
                const std::string& config_hash) {
  const std::uint32_t magic = 0x53414331;  // "SAC1"
  out.write(reinterpret_cast<const char*>(&magic), sizeof(magic));
  const std::uint32_t hash_len = static_cast<std::uint32_t>(config_hash.size());
  out.write(reinterpret_cast<const char*>(&hash_len), sizeof(hash_len));
  out.write(config_hash.data(), hash_len);
  out.write(reinterpret_cast<const char*>(&agent.log_alpha), sizeof(double));
  out.write(reinterpret_cast<const char*>(&agent.target_entropy), sizeof(double));
  out.write(reinterpret_cast<const char*>(&agent.opt_alpha.m), sizeof(double));
  out.write(reinterpret_cast<const char*>(&agent.opt_alpha.v), sizeof(double));
  out.write(reinterpret_cast<const char*>(&agent.opt_alpha.step), sizeof(long));
  out.write(reinterpret_cast<const char*>(&agent.opt_alpha.config.learning_rate),
            sizeof(double));
  const std::int32_t dims[2] = {agent.augmented_dim, agent.action_dim};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  nn::save_mlp(out, agent.policy);
  nn::save_mlp(out, agent.q1);
  nn::save_mlp(out, agent.q2);
  nn::save_mlp(out, agent.target_q1);
  nn::save_mlp(out, agent.target_q2);
  nn::save_adam(out, agent.opt_policy);
  nn::save_adam(out, agent.opt_q1);
  nn::save_adam(out, agent.opt_q2);
}

SacAgent load_agent(std::istream& in, std::string* config_hash) {
  std::uint32_t magic = 0;
  in.read(reinterpret_cast<char*>(&magic), sizeof(magic));
  require(in.good() && magic == 0x53414331, ErrorCode::IoError,
          "not an agent checkpoint");
  std::uint32_t hash_len = 0;
  in.read(reinterpret_cast<char*>(&hash_len), sizeof(hash_len));
  std::string hash(hash_len, '\0');
  in.read(hash.data(), hash_len);
  if (config_hash) *config_hash = hash;

  SacAgent agent;
  in.read(reinterpret_cast<char*>(&agent.log_alpha), sizeof(double));
  in.read(reinterpret_cast<char*>(&agent.target_entropy), sizeof(double));
  in.read(reinterpret_cast<char*>(&agent.opt_alpha.m), sizeof(double));
  in.read(reinterpret_cast<char*>(&agent.opt_alpha.v), sizeof(double));
  in.read(reinterpret_cast<char*>(&agent.opt_alpha.step), sizeof(long));
  in.read(reinterpret_cast<char*>(&agent.opt_alpha.config.learning_rate),
          sizeof(double));
  std::int32_t dims[2] = {0, 0};
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  require(in.good(), ErrorCode::IoError, "truncated agent checkpoint");
  agent.augmented_dim = dims[0];
  agent.action_dim = dims[1];
  agent.policy = nn::load_mlp(in);
  agent.q1 = nn::load_mlp(in);
  agent.q2 = nn::load_mlp(in);
  agent.target_q1 = nn::load_mlp(in);
  agent.target_q2 = nn::load_mlp(in);
  agent.opt_policy = nn::load_adam(in);
  agent.opt_q1 = nn::load_adam(in);
  agent.opt_q2 = nn::load_adam(in);
  return agent;
}

}  // namespace disco::sac
