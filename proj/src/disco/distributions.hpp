#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "disco/mathcore.hpp"
#include "disco/rng.hpp"

namespace disco::dist {

using math::Matrix;

// Constants of the precision-smoothing pipeline. The defaults (threshold
// 0.25, condition cap 100) are the values every fitted distribution in this
// project uses unless a caller overrides them.
struct SmoothingConfig {
  double epsilon = 0.25;
  double kappa_max = 100.0;
};

// A multivariate Gaussian goal distribution omega = (mu, Sigma). `cov` is the
// raw fitted covariance; `precision` is the smoothed inverse actually used by
// the reward. Thresholding can break positive semi-definiteness of the
// precision; `precision_psd` records whether it survived.
struct GaussianParams {
  std::vector<double> mean;
  Matrix cov;
  Matrix precision;
  bool precision_psd = true;
  // Identifies which fitted sub-task this covariance came from; -1 when the
  // parameters were built by hand. Used to de-duplicate the relabeling pool.
  int source_task = -1;

  int dim() const { return static_cast<int>(mean.size()); }
};

struct GmmParams {
  std::vector<double> weights;
  std::vector<GaussianParams> components;

  int dim() const { return components.empty() ? 0 : components.front().dim(); }
};

// Diagonal Gaussian over a latent space, omega = (mu_z, sigma_z^2).
struct LatentGaussianParams {
  std::vector<double> mean_z;
  std::vector<double> var_z;

  int dim() const { return static_cast<int>(mean_z.size()); }
};

// Encoder output q(z; s): a diagonal Gaussian posterior over the latent space.
struct GaussianPosterior {
  std::vector<double> mean;
  std::vector<double> var;
};

// A pluggable state -> posterior map standing in for a trained VAE encoder.
using Encoder = std::function<GaussianPosterior(std::span<const double>)>;

// Joint Gaussian over concatenated (s, s_f) pairs; both halves have dimension
// `half_dim` and the covariance blocks follow that split.
struct JointGaussianParams {
  std::vector<double> mean;
  Matrix cov;
  int half_dim = 0;

  std::vector<double> mean_first() const;
  std::vector<double> mean_second() const;
  Matrix block(int row_block, int col_block) const;
};

// Example states that specify a task, optionally paired with the final state
// of the full task they were drawn from.
struct ExampleSet {
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> final_states;  // empty when unpaired
  double noise_std = 0.0;

  bool paired() const { return !final_states.empty(); }
  int size() const { return static_cast<int>(states.size()); }
  int dim() const { return states.empty() ? 0 : static_cast<int>(states.front().size()); }
};

struct GmmFitConfig {
  int components = 4;
  int restarts = 5;
  int max_iters = 200;
  double tol = 1e-8;
  double covariance_floor = 1e-6;
  double weight_floor = 1e-4;
};

// cap condition -> invert -> normalize max-abs to 1 -> threshold below
// epsilon to exactly 0, in that order.
Matrix smooth_precision(const Matrix& cov, const SmoothingConfig& cfg = {});

// Same pipeline, also reporting whether thresholding kept the result PSD.
struct SmoothedPrecision {
  Matrix precision;
  bool psd;
};
SmoothedPrecision smooth_precision_checked(const Matrix& cov,
                                           const SmoothingConfig& cfg = {});

// r(s; omega) = -0.5 (s - mu)^T P (s - mu) with the smoothed precision P.
// Constant terms are dropped, so r(mean) == 0.
double gaussian_reward(std::span<const double> s, const GaussianParams& omega);

// Gradient of gaussian_reward with respect to s: -P (s - mu).
std::vector<double> gaussian_reward_gradient(std::span<const double> s,
                                             const GaussianParams& omega);

// Full Gaussian log-density (normalizer included), evaluated via `cov`.
double log_gaussian_pdf(std::span<const double> s, std::span<const double> mean,
                        const Matrix& cov);

// Sample mean and 1/K covariance of the noise-perturbed examples, with the
// smoothed precision attached. Noise draws come from `rng`.
GaussianParams fit_gaussian_mle(const ExampleSet& examples, Rng& rng,
                                const SmoothingConfig& cfg = {});

GmmParams fit_gmm_em(const ExampleSet& examples, Rng& rng,
                     const GmmFitConfig& fit = {}, const SmoothingConfig& cfg = {});

// As fit_gmm_em but also returns the per-iteration data log-likelihood of the
// winning restart. Entries are non-decreasing except across component
// re-seeding events, which are recorded separately.
struct GmmFitTrace {
  GmmParams params;
  std::vector<double> log_likelihood;
  std::vector<int> reseed_iterations;
};
GmmFitTrace fit_gmm_em_traced(const ExampleSet& examples, Rng& rng,
                              const GmmFitConfig& fit = {},
                              const SmoothingConfig& cfg = {});

// log sum_j w_j N(s; mu_j, Sigma_j), evaluated with log-sum-exp.
double gmm_reward(std::span<const double> s, const GmmParams& omega);

// Closed-form diagonal Gaussian minimizing KL(mixture-of-posteriors || fit).
LatentGaussianParams moment_match(const std::vector<GaussianPosterior>& posteriors);

// Surrogate for the intractable latent-model likelihood: the diagonal
// Gaussian log-density of the encoder mean under omega, normalizer included.
double latent_reward(std::span<const double> s, const LatentGaussianParams& omega,
                     const Encoder& encoder);

// MLE joint Gaussian over concatenated (s, s_f); both halves receive
// independent noise of examples.noise_std.
JointGaussianParams fit_joint_gaussian(const ExampleSet& pairs, Rng& rng);

// Conditional of the joint given the second half equals s_f:
//   mean = mu1 + S12 S22^-1 (s_f - mu2),  cov = S11 - S12 S22^-1 S21.
// S22 is condition-capped before inversion; the returned precision is the
// smoothed inverse of the conditional covariance.
GaussianParams condition_gaussian(const JointGaussianParams& joint,
                                  std::span<const double> s_f,
                                  const SmoothingConfig& cfg = {});

// Precomputed conditioning for one sub-task. The conditional covariance does
// not depend on s_f, so the gain matrix and smoothed precision are built once
// and conditioning reduces to a mean update. Results match
// condition_gaussian exactly.
class SubtaskConditioner {
 public:
  SubtaskConditioner(const JointGaussianParams& joint, int source_task,
                     const SmoothingConfig& cfg = {});

  GaussianParams condition(std::span<const double> s_f) const;
  std::vector<double> conditional_mean(std::span<const double> s_f) const;
  const GaussianParams& base() const { return base_; }
  int source_task() const { return base_.source_task; }

 private:
  std::vector<double> mu1_;
  std::vector<double> mu2_;
  Matrix gain_;  // S12 S22c^-1
  GaussianParams base_;  // conditional covariance/precision, mean unset
};

// --- structured-text (JSON) serialization -------------------------------

std::string example_set_to_json(const ExampleSet& set, std::uint64_t seed,
                                const std::string& config_hash = "");
ExampleSet example_set_from_json(const std::string& text);
void save_example_set(const std::string& path, const ExampleSet& set,
                      std::uint64_t seed, const std::string& config_hash = "");
ExampleSet load_example_set(const std::string& path);

std::string gaussian_params_to_json(const GaussianParams& params,
                                    const SmoothingConfig& cfg,
                                    const std::string& config_hash = "");
GaussianParams gaussian_params_from_json(const std::string& text);
void save_gaussian_params(const std::string& path, const GaussianParams& params,
                          const SmoothingConfig& cfg,
                          const std::string& config_hash = "");
GaussianParams load_gaussian_params(const std::string& path);

std::string joint_params_to_json(const JointGaussianParams& params,
                                 const std::string& config_hash = "");
JointGaussianParams joint_params_from_json(const std::string& text);

std::string gmm_params_to_json(const GmmParams& params, const SmoothingConfig& cfg,
                               const std::string& config_hash = "");
GmmParams gmm_params_from_json(const std::string& text);

std::string latent_params_to_json(const LatentGaussianParams& params,
                                  const std::string& config_hash = "");
LatentGaussianParams latent_params_from_json(const std::string& text);

}  // namespace disco::dist
