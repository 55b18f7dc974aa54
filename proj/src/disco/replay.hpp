#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "disco/distributions.hpp"
#include "disco/rng.hpp"

namespace disco::replay {

using dist::GaussianParams;

// A goal vector used directly as the conditioning context (the HER baseline).
struct GoalVector {
  std::vector<double> goal;
};

// Conditional-task context: a final desired state plus the sub-task schedule
// that was active while the trajectory was collected. `omegas[i]` caches the
// conditioned parameters h_i(s_f) for sub-task i.
struct ConditionalTask {
  std::vector<double> s_f;
  std::vector<int> schedule;  // sub-task id per segment
  int segment_length = 0;
  std::vector<GaussianParams> omegas;

  int subtask_at(int t) const;
  const GaussianParams& omega_at(int t) const;
};

using Omega = std::variant<GaussianParams, dist::GmmParams, dist::LatentGaussianParams,
                           ConditionalTask, GoalVector>;

struct StoredTrajectory {
  std::vector<std::vector<double>> observations;  // length H+1
  std::vector<std::vector<double>> actions;       // length H
  Omega omega;

  int horizon() const { return static_cast<int>(actions.size()); }
  void validate() const;
};

// Ring buffer of whole trajectories with FIFO eviction once the transition
// capacity is exceeded. Stores the distinct Gaussian covariances seen at
// collection time; those form the re-sampling pool for relabeling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity_transitions)
      : capacity_(capacity_transitions) {}

  void store(StoredTrajectory trajectory);

  std::size_t size_transitions() const { return transitions_; }
  std::size_t size_trajectories() const { return trajectories_.size(); }
  std::uint64_t insertions() const { return insertions_; }
  bool empty() const { return trajectories_.empty(); }

  const StoredTrajectory& trajectory(std::size_t i) const { return trajectories_[i]; }

  struct PoolEntry {
    math::Matrix cov;
    math::Matrix precision;
    bool precision_psd = true;
    int source_task = -1;
  };
  const std::vector<PoolEntry>& covariance_pool() const { return pool_; }

 private:
  void add_to_pool(const GaussianParams& params);

  std::size_t capacity_;
  std::size_t transitions_ = 0;
  std::uint64_t insertions_ = 0;
  std::deque<StoredTrajectory> trajectories_;
  std::vector<PoolEntry> pool_;
};

struct FutureSample {
  const StoredTrajectory* trajectory = nullptr;
  int t = 0;
  int h = 0;
};

// Uniform trajectory, uniform t in {0..H-1}, uniform h in {t+1..H}.
FutureSample sample_with_future(const ReplayBuffer& buffer, Rng& rng);

struct RelabelConfig {
  // Total relabeling probability (used directly by the single-strategy
  // Gaussian relabel) and its split into the two conditional/HER branches.
  double p_relabel = 0.8;
  double future_fraction = 0.4;
  double random_fraction = 0.4;
  // Ablation switches: disable replacing the mean / re-sampling the
  // covariance independently.
  bool mean_relabel = true;
  bool covariance_relabel = true;
  // Draws a uniform goal observation from the environment's goal space.
  std::function<std::vector<double>(Rng&)> sample_random_goal;

  void validate() const;
};

// RS(s_h, (mu, Sigma)) = (s_h, Sigma') with Sigma' drawn uniformly from the
// pool of stored covariances; fires with probability p_relabel.
GaussianParams relabel_disco(const GaussianParams& omega, std::span<const double> s_h,
                             const ReplayBuffer& buffer, Rng& rng,
                             const RelabelConfig& config);

// Branches: future_fraction -> condition on s_h; random_fraction ->
// condition on a fresh random s_f; remainder -> unchanged. Whenever a branch
// fires the sub-task (and with it the covariance) is re-sampled uniformly.
GaussianParams relabel_conditional(const GaussianParams& omega,
                                   std::span<const double> s_h,
                                   const std::vector<dist::SubtaskConditioner>& joints,
                                   Rng& rng, const RelabelConfig& config);

// HER goal relabel: future_fraction -> s_h, random_fraction -> random goal,
// remainder -> unchanged.
std::vector<double> relabel_her(std::span<const double> goal,
                                std::span<const double> s_h, Rng& rng,
                                const RelabelConfig& config);

struct TransitionBatch {
  Eigen::MatrixXd augmented_obs;
  Eigen::MatrixXd actions;
  Eigen::MatrixXd augmented_next;
  Eigen::VectorXd rewards;

  int size() const { return static_cast<int>(rewards.size()); }
};

// Per-variant behavior plugged into assemble_batch: relabel the collection
// context, compute the reward of the (possibly relabeled) context at s_t, and
// write the context vector used for state augmentation. The owning buffer is
// passed through so relabeling can reach the covariance pool.
struct BatchHooks {
  int omega_dim = 0;
  std::function<Omega(const ReplayBuffer&, const StoredTrajectory&, int t,
                      std::span<const double> s_h, Rng&)>
      relabel;
  std::function<double(std::span<const double> s, const Omega&)> reward;
  std::function<void(const Omega&, std::span<double> out)> vectorize;
};

// Algorithm core: sample transition + future state, relabel, recompute the
// reward under the new context, and augment both states with it.
TransitionBatch assemble_batch(const ReplayBuffer& buffer, int batch_size,
                               const BatchHooks& hooks, Rng& rng);

// Context vector layout for a Gaussian omega: mean followed by the row-major
// upper triangle of the smoothed precision.
int gaussian_omega_dim(int state_dim);
void vectorize_gaussian(const GaussianParams& params, std::span<double> out);

// Buffer persistence: trajectories in the environment dump layout with the
// collection context serialized alongside each one.
std::string buffer_to_json(const ReplayBuffer& buffer);
void save_buffer(const std::string& path, const ReplayBuffer& buffer);
ReplayBuffer load_buffer(const std::string& path, std::size_t capacity_transitions);

}  // namespace disco::replay
