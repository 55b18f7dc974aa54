#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "disco/distributions.hpp"
#include "disco/env.hpp"
#include "disco/replay.hpp"
#include "disco/sac.hpp"

namespace disco::trainer {

enum class Variant { kDisco, kConditionalDisco, kHer };
enum class GoalModel { kGaussian, kGmm, kLatent };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);
const char* model_name(GoalModel m);
GoalModel model_from_name(const std::string& name);

struct EvalConfig {
  int every_episodes = 50;
  int episodes = 20;
  // Count a sub-task as solved if its object was in radius at any time after
  // its segment began; false checks the terminal state only.
  bool latched = true;
};

struct TrainConfig {
  int episodes = 2000;
  int horizon = 100;
  int updates_per_episode = 100;
  int subtask_count = 2;
  int m_objects = 2;
  int prefill_episodes = 10;
  std::size_t buffer_capacity = 200000;
  std::vector<int> hidden = {128, 128};
  EvalConfig eval;

  void validate(Variant variant) const;
};

struct MetricRow {
  int episode = 0;
  long env_steps = 0;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;
};

struct RunMetrics {
  std::vector<MetricRow> rows;
  // Wall clock is reported on the console only; it never enters the
  // serialized outputs so repeated runs stay byte-identical.
  double wall_clock_seconds = 0.0;

  std::optional<double> value_at(const std::string& metric, long env_steps) const;
  double final_value(const std::string& metric) const;
  std::string to_csv(const std::string& config_hash, std::uint64_t seed) const;
};

// A fixed goal context for plain (unconditional) runs.
struct DiscoGoal {
  replay::Omega omega;     // GaussianParams | GmmParams | LatentGaussianParams
  dist::Encoder encoder;   // required by the latent model only
};

// One agent action request during evaluation; `active` is the goal
// distribution of the currently scheduled sub-task.
using ActionSource = std::function<flatworld::Action(
    const std::vector<double>& observation, const dist::GaussianParams& active, int t)>;

struct SequentialEvalResult {
  int solved = 0;
  std::vector<double> final_observation;
};

// Roll one episode conditioning on each sub-task for H/M steps in index
// order; returns the (latched) number of solved sub-tasks.
SequentialEvalResult evaluate_sequential(const ActionSource& act,
                                         const std::vector<dist::GaussianParams>& omegas,
                                         std::uint64_t env_seed,
                                         const flatworld::TaskSpec& task, int horizon,
                                         int subtask_count, bool latched);

// Exploration context for one episode: half the rollouts stick to a single
// random sub-task, half cycle through all of them in random order with equal
// time per sub-task.
replay::ConditionalTask make_exploration_schedule(int subtask_count, int horizon,
                                                  Rng& rng);

// Final learner state plus the positions of the named random streams when
// training finished (stored into checkpoints).
struct TrainedState {
  sac::SacAgent agent;
  std::vector<std::pair<std::string, std::string>> rng_states;
};

RunMetrics run_disco(const TrainConfig& train, const sac::SacConfig& sac_config,
                     const replay::RelabelConfig& relabel,
                     const std::vector<DiscoGoal>& goals, std::uint64_t master_seed,
                     TrainedState* trained = nullptr);

RunMetrics run_conditional_disco(const TrainConfig& train,
                                 const sac::SacConfig& sac_config,
                                 const replay::RelabelConfig& relabel,
                                 const std::vector<dist::SubtaskConditioner>& joints,
                                 std::uint64_t master_seed,
                                 TrainedState* trained = nullptr);

RunMetrics run_her(const TrainConfig& train, const sac::SacConfig& sac_config,
                   const replay::RelabelConfig& relabel, std::uint64_t master_seed,
                   TrainedState* trained = nullptr);

// The three relabeling ablation arms: full relabel, mean relabel disabled,
// covariance relabel disabled. Same seed, same evaluation axes.
std::map<std::string, RunMetrics> relabel_ablation(
    const TrainConfig& train, const sac::SacConfig& sac_config,
    const replay::RelabelConfig& relabel,
    const std::vector<dist::SubtaskConditioner>& joints, std::uint64_t master_seed);

// Post-training evaluation with a fresh seed (used by the eval command).
RunMetrics evaluate_agent(const sac::SacAgent& agent, Variant variant,
                          const TrainConfig& train,
                          const std::vector<DiscoGoal>& goals,
                          const std::vector<dist::SubtaskConditioner>& joints,
                          std::uint64_t seed, int episodes);

// Full-run checkpoint: the agent plus the positions of the named random
// streams at save time.
void save_checkpoint(const std::string& path, const sac::SacAgent& agent,
                     const std::string& config_hash,
                     const std::vector<std::pair<std::string, std::string>>& rng_states);
sac::SacAgent load_checkpoint(const std::string& path, std::string* config_hash = nullptr);

}  // namespace disco::trainer
