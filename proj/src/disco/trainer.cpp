#include "disco/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace disco::trainer {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kDisco: return "disco";
    case Variant::kConditionalDisco: return "conditional-disco";
    case Variant::kHer: return "her";
  }
  return "unknown";
}

Variant variant_from_name(const std::string& name) {
  if (name == "disco") return Variant::kDisco;
  if (name == "conditional-disco") return Variant::kConditionalDisco;
  if (name == "her") return Variant::kHer;
  throw Error(ErrorCode::ConfigError, "unknown variant: " + name);
}

const char* model_name(GoalModel m) {
  switch (m) {
    case GoalModel::kGaussian: return "gaussian";
    case GoalModel::kGmm: return "gmm";
    case GoalModel::kLatent: return "latent";
  }
  return "unknown";
}

GoalModel model_from_name(const std::string& name) {
  if (name == "gaussian") return GoalModel::kGaussian;
  if (name == "gmm") return GoalModel::kGmm;
  if (name == "latent") return GoalModel::kLatent;
  throw Error(ErrorCode::ConfigError, "unknown model: " + name);
}

void TrainConfig::validate(Variant variant) const {
  require(horizon >= 1, ErrorCode::ConfigError, "horizon must be positive");
  require(episodes >= 0, ErrorCode::ConfigError, "episode count must be non-negative");
  require(updates_per_episode >= 0, ErrorCode::ConfigError,
          "updates per episode must be non-negative");
  require(m_objects >= 0, ErrorCode::ConfigError, "object count must be non-negative");
  require(buffer_capacity >= static_cast<std::size_t>(horizon), ErrorCode::ConfigError,
          "buffer must hold at least one trajectory");
  require(eval.every_episodes >= 1, ErrorCode::ConfigError,
          "evaluation cadence must be positive");
  require(eval.episodes >= 1, ErrorCode::ConfigError,
          "need at least one evaluation episode");
  if (variant == Variant::kConditionalDisco) {
    require(subtask_count >= 1, ErrorCode::ConfigError, "need at least one sub-task");
    require(horizon % subtask_count == 0, ErrorCode::ConfigError,
            "horizon must divide evenly across sub-tasks");
    require(subtask_count <= m_objects, ErrorCode::ConfigError,
            "more sub-tasks than objects");
  }
}

std::optional<double> RunMetrics::value_at(const std::string& metric,
                                           long env_steps) const {
  for (const auto& row : rows)
    if (row.metric == metric && row.env_steps == env_steps) return row.mean;
  return std::nullopt;
}

double RunMetrics::final_value(const std::string& metric) const {
  for (auto it = rows.rbegin(); it != rows.rend(); ++it)
    if (it->metric == metric) return it->mean;
  throw Error(ErrorCode::InvalidArgument, "metric never recorded: " + metric);
}

namespace {

std::string format_double(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

}  // namespace

std::string RunMetrics::to_csv(const std::string& config_hash,
                               std::uint64_t seed) const {
  std::ostringstream out;
  out << "# config_hash=" << config_hash << "\n";
  out << "episode,env_steps,metric,mean,std,seed\n";
  for (const auto& row : rows)
    out << row.episode << ',' << row.env_steps << ',' << row.metric << ','
        << format_double(row.mean) << ',' << format_double(row.stddev) << ',' << seed
        << "\n";
  return out.str();
}

replay::ConditionalTask make_exploration_schedule(int subtask_count, int horizon,
                                                  Rng& rng) {
  replay::ConditionalTask task;
  if (rng.bernoulli(0.5) || subtask_count == 1) {
    task.schedule = {static_cast<int>(rng.index(subtask_count))};
    task.segment_length = horizon;
    return task;
  }
  task.schedule.resize(subtask_count);
  std::iota(task.schedule.begin(), task.schedule.end(), 0);
  for (int i = subtask_count - 1; i > 0; --i)
    std::swap(task.schedule[i], task.schedule[static_cast<int>(rng.index(i + 1))]);
  task.segment_length = horizon / subtask_count;
  return task;
}

namespace {

using dist::GaussianParams;
using flatworld::Action;
using flatworld::FlatWorldState;

struct Rollout {
  std::vector<std::vector<double>> observations;
  std::vector<std::vector<double>> actions;
};

template <typename ActFn>
Rollout collect_episode(std::uint64_t env_seed, int m_objects, int horizon,
                        ActFn&& act) {
  Rollout rollout;
  FlatWorldState state = flatworld::reset(env_seed, m_objects);
  for (int t = 0; t < horizon; ++t) {
    std::vector<double> obs = flatworld::observe(state);
    const Action action = act(obs, t);
    rollout.observations.push_back(std::move(obs));
    rollout.actions.push_back({action.dx, action.dy, action.grab});
    state = flatworld::step(state, action);
  }
  rollout.observations.push_back(flatworld::observe(state));
  return rollout;
}

Action random_action(Rng& rng) {
  return {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
}

Action to_action(const std::vector<double>& a) { return {a[0], a[1], a[2]}; }

std::vector<double> augmented(const std::vector<double>& obs,
                              std::span<const double> omega_vec) {
  std::vector<double> aug;
  aug.reserve(obs.size() + omega_vec.size());
  aug.insert(aug.end(), obs.begin(), obs.end());
  aug.insert(aug.end(), omega_vec.begin(), omega_vec.end());
  return aug;
}

struct MetricAccumulator {
  std::vector<double> values;

  void add(double v) { values.push_back(v); }
  double mean() const {
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
  }
  double stddev() const {
    const double m = mean();
    double acc = 0.0;
    for (double v : values) acc += (v - m) * (v - m);
    return std::sqrt(acc / static_cast<double>(values.size()));
  }
};

double distance_to_goal(const std::vector<double>& obs, const DiscoGoal& goal) {
  if (const auto* gaussian = std::get_if<GaussianParams>(&goal.omega))
    return math::norm(math::sub(obs, gaussian->mean));
  if (const auto* gmm = std::get_if<dist::GmmParams>(&goal.omega)) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& comp : gmm->components)
      best = std::min(best, math::norm(math::sub(obs, comp.mean)));
    return best;
  }
  const auto& latent = std::get<dist::LatentGaussianParams>(goal.omega);
  const dist::GaussianPosterior post = goal.encoder(obs);
  return math::norm(math::sub(post.mean, latent.mean_z));
}

int goal_vector_dim(const DiscoGoal& goal) {
  if (const auto* gaussian = std::get_if<GaussianParams>(&goal.omega))
    return replay::gaussian_omega_dim(gaussian->dim());
  if (const auto* gmm = std::get_if<dist::GmmParams>(&goal.omega)) {
    const int k = static_cast<int>(gmm->components.size());
    return k + k * replay::gaussian_omega_dim(gmm->dim());
  }
  return 2 * std::get<dist::LatentGaussianParams>(goal.omega).dim();
}

void vectorize_goal(const replay::Omega& omega, std::span<double> out) {
  if (const auto* gaussian = std::get_if<GaussianParams>(&omega)) {
    replay::vectorize_gaussian(*gaussian, out);
    return;
  }
  if (const auto* gmm = std::get_if<dist::GmmParams>(&omega)) {
    const int stride = replay::gaussian_omega_dim(gmm->dim());
    std::size_t k = 0;
    for (double w : gmm->weights) out[k++] = w;
    for (const auto& comp : gmm->components) {
      replay::vectorize_gaussian(comp, out.subspan(k, stride));
      k += stride;
    }
    return;
  }
  if (const auto* latent = std::get_if<dist::LatentGaussianParams>(&omega)) {
    std::size_t k = 0;
    for (double v : latent->mean_z) out[k++] = v;
    for (double v : latent->var_z) out[k++] = v;
    return;
  }
  if (const auto* goal = std::get_if<replay::GoalVector>(&omega)) {
    std::copy(goal->goal.begin(), goal->goal.end(), out.begin());
    return;
  }
  throw Error(ErrorCode::InvalidArgument, "context cannot be vectorized here");
}

std::vector<double> deterministic_action(const sac::SacAgent& agent,
                                         const std::vector<double>& aug) {
  Rng unused(0);
  return sac::select_action(agent, aug, sac::ActionMode::kDeterministic, unused);
}

// Variant-specific behavior plugged into the shared training loop.
struct LoopHooks {
  std::function<replay::Omega(int episode, Rng& task_rng)> begin_episode;
  std::function<std::vector<double>(const replay::Omega& context,
                                    const std::vector<double>& obs, int t)>
      augment;
  replay::BatchHooks batch_hooks;
  // One evaluation episode: returns final distance and, when defined for the
  // variant, the number of solved sub-tasks.
  std::function<std::pair<double, std::optional<int>>(const sac::SacAgent&,
                                                      std::uint64_t env_seed,
                                                      Rng& eval_rng)>
      evaluate;
};

RunMetrics run_loop(const TrainConfig& train, const sac::SacConfig& sac_config,
                    int omega_dim, std::uint64_t master_seed, const LoopHooks& hooks,
                    TrainedState* trained) {
  sac_config.validate();
  const auto start_time = std::chrono::steady_clock::now();

  const int obs_dim = flatworld::observation_dim(train.m_objects);
  Rng init_rng = derive_rng(master_seed, "init");
  Rng policy_rng = derive_rng(master_seed, "policy-noise");
  Rng task_rng = derive_rng(master_seed, "task");
  Rng update_rng = derive_rng(master_seed, "updates");
  Rng eval_rng = derive_rng(master_seed, "eval");

  sac::SacAgent agent =
      sac::make_agent(obs_dim + omega_dim, 3, train.hidden, init_rng, sac_config);
  replay::ReplayBuffer buffer(train.buffer_capacity);

  RunMetrics metrics;
  double distance_baseline = -1.0;
  int eval_counter = 0;

  auto run_evaluation = [&](int episode, long env_steps) {
    MetricAccumulator distance;
    std::optional<MetricAccumulator> solved;
    for (int e = 0; e < train.eval.episodes; ++e) {
      const std::uint64_t seed =
          derive_seed(master_seed, "eval-env",
                      static_cast<std::uint64_t>(eval_counter) * 1000003ULL + e);
      const auto [d, s] = hooks.evaluate(agent, seed, eval_rng);
      distance.add(d);
      if (s) {
        if (!solved) solved.emplace();
        solved->add(static_cast<double>(*s));
      }
    }
    if (solved)
      metrics.rows.push_back(
          {episode, env_steps, "tasks_solved", solved->mean(), solved->stddev()});
    const double mean_distance = distance.mean();
    if (distance_baseline < 0.0) distance_baseline = std::max(mean_distance, 1e-9);
    metrics.rows.push_back(
        {episode, env_steps, "final_distance", mean_distance, distance.stddev()});
    metrics.rows.push_back({episode, env_steps, "normalized_final_distance",
                            mean_distance / distance_baseline,
                            distance.stddev() / distance_baseline});
    eval_counter += 1;
  };

  run_evaluation(0, 0);

  for (int episode = 0; episode < train.episodes; ++episode) {
    const replay::Omega episode_context = hooks.begin_episode(episode, task_rng);
    const std::uint64_t env_seed = derive_seed(master_seed, "env", episode);
    const bool prefill = episode < train.prefill_episodes;

    Rollout rollout = collect_episode(
        env_seed, train.m_objects, train.horizon,
        [&](const std::vector<double>& obs, int t) -> Action {
          if (prefill) return random_action(policy_rng);
          return to_action(sac::select_action(agent,
                                              hooks.augment(episode_context, obs, t),
                                              sac::ActionMode::kStochastic,
                                              policy_rng));
        });

    replay::StoredTrajectory trajectory;
    trajectory.observations = std::move(rollout.observations);
    trajectory.actions = std::move(rollout.actions);
    trajectory.omega = episode_context;
    buffer.store(std::move(trajectory));

    if (!prefill) {
      for (int u = 0; u < train.updates_per_episode; ++u) {
        const replay::TransitionBatch batch = replay::assemble_batch(
            buffer, sac_config.batch_size, hooks.batch_hooks, update_rng);
        sac::update_step(agent, batch, sac_config, update_rng);
      }
    }

    if ((episode + 1) % train.eval.every_episodes == 0)
      run_evaluation(episode + 1, static_cast<long>(episode + 1) * train.horizon);
  }

  metrics.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time)
          .count();
  if (trained) {
    trained->agent = std::move(agent);
    trained->rng_states = {{"policy-noise", policy_rng.save_state()},
                           {"task", task_rng.save_state()},
                           {"updates", update_rng.save_state()},
                           {"eval", eval_rng.save_state()}};
  }
  return metrics;
}

}  // namespace

SequentialEvalResult evaluate_sequential(const ActionSource& act,
                                         const std::vector<GaussianParams>& omegas,
                                         std::uint64_t env_seed,
                                         const flatworld::TaskSpec& task, int horizon,
                                         int subtask_count, bool latched) {
  require(subtask_count >= 1 && horizon % subtask_count == 0,
          ErrorCode::InvalidArgument, "horizon must divide across sub-tasks");
  require(static_cast<int>(omegas.size()) == subtask_count, ErrorCode::MissingJoint,
          "need one conditioned distribution per sub-task");
  const int m_objects = (static_cast<int>(task.final_state.size()) - 2) / 2;
  const int segment = horizon / subtask_count;

  FlatWorldState state = flatworld::reset(env_seed, m_objects);
  std::vector<bool> solved(state.object_count(), false);

  // Sub-task j can latch once its segment has begun.
  auto latch = [&](int time) {
    for (int j = 0; j < state.object_count() && j < subtask_count; ++j) {
      if (time < j * segment) continue;
      if (flatworld::object_goal_distance(state, task.final_state, j) <
          task.success_radius)
        solved[j] = true;
    }
  };

  latch(0);
  for (int t = 0; t < horizon; ++t) {
    const int active = std::min(t / segment, subtask_count - 1);
    const std::vector<double> obs = flatworld::observe(state);
    state = flatworld::step(state, act(obs, omegas[active], t));
    latch(t + 1);
  }

  SequentialEvalResult result;
  result.final_observation = flatworld::observe(state);
  if (latched) {
    for (int j = 0; j < subtask_count && j < state.object_count(); ++j)
      if (solved[j]) ++result.solved;
  } else {
    result.solved = flatworld::tasks_solved(state, task);
  }
  return result;
}

RunMetrics run_disco(const TrainConfig& train, const sac::SacConfig& sac_config,
                     const replay::RelabelConfig& relabel,
                     const std::vector<DiscoGoal>& goals, std::uint64_t master_seed,
                     TrainedState* trained) {
  train.validate(Variant::kDisco);
  relabel.validate();
  require(!goals.empty(), ErrorCode::InvalidArgument, "need at least one goal");
  const int omega_dim = goal_vector_dim(goals.front());
  for (const auto& g : goals)
    require(goal_vector_dim(g) == omega_dim, ErrorCode::DimensionMismatch,
            "goals must share a parameter layout");
  const bool gaussian_model =
      std::holds_alternative<GaussianParams>(goals.front().omega);

  LoopHooks hooks;
  hooks.begin_episode = [&goals](int, Rng& task_rng) -> replay::Omega {
    return goals[task_rng.index(goals.size())].omega;
  };
  hooks.augment = [omega_dim](const replay::Omega& omega,
                              const std::vector<double>& obs, int) {
    std::vector<double> vec(omega_dim);
    vectorize_goal(omega, vec);
    return augmented(obs, vec);
  };

  hooks.batch_hooks.omega_dim = omega_dim;
  if (gaussian_model) {
    hooks.batch_hooks.relabel =
        [relabel](const replay::ReplayBuffer& buffer,
                  const replay::StoredTrajectory& traj, int, std::span<const double> s_h,
                  Rng& rng) -> replay::Omega {
      return replay::relabel_disco(std::get<GaussianParams>(traj.omega), s_h, buffer,
                                   rng, relabel);
    };
  } else {
    // GMM and latent parameter layouts have no relabeling strategy; keep the
    // collection-time context.
    hooks.batch_hooks.relabel = [](const replay::ReplayBuffer&,
                                   const replay::StoredTrajectory& traj, int,
                                   std::span<const double>, Rng&) {
      return traj.omega;
    };
  }
  const dist::Encoder encoder = goals.front().encoder;
  hooks.batch_hooks.reward = [encoder](std::span<const double> s,
                                       const replay::Omega& omega) -> double {
    if (const auto* gaussian = std::get_if<GaussianParams>(&omega))
      return dist::gaussian_reward(s, *gaussian);
    if (const auto* gmm = std::get_if<dist::GmmParams>(&omega))
      return dist::gmm_reward(s, *gmm);
    return dist::latent_reward(s, std::get<dist::LatentGaussianParams>(omega),
                               encoder);
  };
  hooks.batch_hooks.vectorize = vectorize_goal;

  hooks.evaluate = [&goals, &train](const sac::SacAgent& agent, std::uint64_t env_seed,
                                    Rng& eval_rng)
      -> std::pair<double, std::optional<int>> {
    const DiscoGoal& goal =
        goals[goals.size() == 1 ? 0 : eval_rng.index(goals.size())];
    std::vector<double> vec(goal_vector_dim(goal));
    vectorize_goal(goal.omega, vec);
    const Rollout rollout = collect_episode(
        env_seed, train.m_objects, train.horizon,
        [&](const std::vector<double>& obs, int) {
          return to_action(deterministic_action(agent, augmented(obs, vec)));
        });
    return {distance_to_goal(rollout.observations.back(), goal), std::nullopt};
  };

  return run_loop(train, sac_config, omega_dim, master_seed, hooks, trained);
}

RunMetrics run_conditional_disco(const TrainConfig& train,
                                 const sac::SacConfig& sac_config,
                                 const replay::RelabelConfig& relabel,
                                 const std::vector<dist::SubtaskConditioner>& joints,
                                 std::uint64_t master_seed,
                                 TrainedState* trained) {
  train.validate(Variant::kConditionalDisco);
  relabel.validate();
  require(static_cast<int>(joints.size()) == train.subtask_count,
          ErrorCode::MissingJoint, "need one fitted joint per sub-task");

  const int obs_dim = flatworld::observation_dim(train.m_objects);
  const int omega_dim = replay::gaussian_omega_dim(obs_dim);
  const int m_objects = train.m_objects;

  replay::RelabelConfig relabel_cfg = relabel;
  if (!relabel_cfg.sample_random_goal)
    relabel_cfg.sample_random_goal = [m_objects](Rng& rng) {
      return flatworld::sample_goal_observation(rng, m_objects);
    };

  LoopHooks hooks;
  hooks.begin_episode = [&joints, &train](int, Rng& task_rng) -> replay::Omega {
    // Draw order: final state first, then the exploration schedule.
    replay::ConditionalTask task;
    task.s_f = flatworld::sample_goal_observation(task_rng, train.m_objects);
    replay::ConditionalTask schedule =
        make_exploration_schedule(train.subtask_count, train.horizon, task_rng);
    task.schedule = std::move(schedule.schedule);
    task.segment_length = schedule.segment_length;
    for (const auto& joint : joints) task.omegas.push_back(joint.condition(task.s_f));
    return task;
  };
  hooks.augment = [omega_dim](const replay::Omega& omega,
                              const std::vector<double>& obs, int t) {
    const auto& task = std::get<replay::ConditionalTask>(omega);
    std::vector<double> vec(omega_dim);
    replay::vectorize_gaussian(task.omega_at(t), vec);
    return augmented(obs, vec);
  };

  hooks.batch_hooks.omega_dim = omega_dim;
  hooks.batch_hooks.relabel =
      [&joints, relabel_cfg](const replay::ReplayBuffer&,
                             const replay::StoredTrajectory& traj, int t,
                             std::span<const double> s_h, Rng& rng) -> replay::Omega {
    const auto& task = std::get<replay::ConditionalTask>(traj.omega);
    return replay::relabel_conditional(task.omega_at(t), s_h, joints, rng, relabel_cfg);
  };
  hooks.batch_hooks.reward = [](std::span<const double> s, const replay::Omega& omega) {
    return dist::gaussian_reward(s, std::get<GaussianParams>(omega));
  };
  hooks.batch_hooks.vectorize = [](const replay::Omega& omega, std::span<double> out) {
    replay::vectorize_gaussian(std::get<GaussianParams>(omega), out);
  };

  hooks.evaluate = [&joints, &train](const sac::SacAgent& agent,
                                     std::uint64_t env_seed, Rng& eval_rng)
      -> std::pair<double, std::optional<int>> {
    const std::vector<double> s_f =
        flatworld::sample_goal_observation(eval_rng, train.m_objects);
    std::vector<GaussianParams> omegas;
    omegas.reserve(joints.size());
    for (const auto& joint : joints) omegas.push_back(joint.condition(s_f));

    const ActionSource act = [&agent](const std::vector<double>& obs,
                                      const GaussianParams& active, int) -> Action {
      std::vector<double> vec(replay::gaussian_omega_dim(active.dim()));
      replay::vectorize_gaussian(active, vec);
      return to_action(deterministic_action(agent, augmented(obs, vec)));
    };

    flatworld::TaskSpec task;
    task.final_state = s_f;
    const SequentialEvalResult result =
        evaluate_sequential(act, omegas, env_seed, task, train.horizon,
                            train.subtask_count, train.eval.latched);
    const double distance =
        math::norm(math::sub(result.final_observation, s_f));
    return {distance, result.solved};
  };

  return run_loop(train, sac_config, omega_dim, master_seed, hooks, trained);
}

RunMetrics run_her(const TrainConfig& train, const sac::SacConfig& sac_config,
                   const replay::RelabelConfig& relabel, std::uint64_t master_seed,
                   TrainedState* trained) {
  train.validate(Variant::kHer);
  relabel.validate();

  const int obs_dim = flatworld::observation_dim(train.m_objects);
  const int m_objects = train.m_objects;

  replay::RelabelConfig relabel_cfg = relabel;
  if (!relabel_cfg.sample_random_goal)
    relabel_cfg.sample_random_goal = [m_objects](Rng& rng) {
      return flatworld::sample_goal_observation(rng, m_objects);
    };

  LoopHooks hooks;
  hooks.begin_episode = [&train](int, Rng& task_rng) -> replay::Omega {
    return replay::GoalVector{
        flatworld::sample_goal_observation(task_rng, train.m_objects)};
  };
  hooks.augment = [](const replay::Omega& omega, const std::vector<double>& obs, int) {
    return augmented(obs, std::get<replay::GoalVector>(omega).goal);
  };

  hooks.batch_hooks.omega_dim = obs_dim;  // the goal is a full observation
  hooks.batch_hooks.relabel =
      [relabel_cfg](const replay::ReplayBuffer&, const replay::StoredTrajectory& traj,
                    int, std::span<const double> s_h, Rng& rng) -> replay::Omega {
    const auto& goal = std::get<replay::GoalVector>(traj.omega);
    return replay::GoalVector{replay::relabel_her(goal.goal, s_h, rng, relabel_cfg)};
  };
  hooks.batch_hooks.reward = [](std::span<const double> s, const replay::Omega& omega) {
    return flatworld::oracle_goal_reward(s, std::get<replay::GoalVector>(omega).goal);
  };
  hooks.batch_hooks.vectorize = [](const replay::Omega& omega, std::span<double> out) {
    const auto& goal = std::get<replay::GoalVector>(omega).goal;
    std::copy(goal.begin(), goal.end(), out.begin());
  };

  hooks.evaluate = [&train](const sac::SacAgent& agent, std::uint64_t env_seed,
                            Rng& eval_rng) -> std::pair<double, std::optional<int>> {
    const std::vector<double> goal =
        flatworld::sample_goal_observation(eval_rng, train.m_objects);

    FlatWorldState state = flatworld::reset(env_seed, train.m_objects);
    flatworld::TaskSpec task;
    task.final_state = goal;
    std::vector<bool> solved(state.object_count(), false);
    auto latch = [&] {
      for (int j = 0; j < state.object_count(); ++j)
        if (flatworld::object_goal_distance(state, goal, j) < task.success_radius)
          solved[j] = true;
    };
    latch();
    for (int t = 0; t < train.horizon; ++t) {
      const std::vector<double> obs = flatworld::observe(state);
      state = flatworld::step(state, to_action(deterministic_action(
                                         agent, augmented(obs, goal))));
      latch();
    }
    int count = 0;
    if (train.eval.latched) {
      for (bool s : solved)
        if (s) ++count;
    } else {
      count = flatworld::tasks_solved(state, task);
    }
    const double distance = math::norm(math::sub(flatworld::observe(state), goal));
    return {distance, count};
  };

  return run_loop(train, sac_config, obs_dim, master_seed, hooks, trained);
}

std::map<std::string, RunMetrics> relabel_ablation(
    const TrainConfig& train, const sac::SacConfig& sac_config,
    const replay::RelabelConfig& relabel,
    const std::vector<dist::SubtaskConditioner>& joints, std::uint64_t master_seed) {
  std::map<std::string, RunMetrics> results;

  replay::RelabelConfig full = relabel;
  full.mean_relabel = true;
  full.covariance_relabel = true;
  results["full"] = run_conditional_disco(train, sac_config, full, joints, master_seed);

  replay::RelabelConfig no_mean = relabel;
  no_mean.mean_relabel = false;
  no_mean.covariance_relabel = true;
  results["no-mean-relabel"] =
      run_conditional_disco(train, sac_config, no_mean, joints, master_seed);

  replay::RelabelConfig no_cov = relabel;
  no_cov.mean_relabel = true;
  no_cov.covariance_relabel = false;
  results["no-covariance-relabel"] =
      run_conditional_disco(train, sac_config, no_cov, joints, master_seed);

  return results;
}

RunMetrics evaluate_agent(const sac::SacAgent& agent, Variant variant,
                          const TrainConfig& train,
                          const std::vector<DiscoGoal>& goals,
                          const std::vector<dist::SubtaskConditioner>& joints,
                          std::uint64_t seed, int episodes) {
  RunMetrics metrics;
  MetricAccumulator distance;
  std::optional<MetricAccumulator> solved;
  Rng eval_rng = derive_rng(seed, "eval");

  for (int e = 0; e < episodes; ++e) {
    const std::uint64_t env_seed = derive_seed(seed, "eval-env", e);
    if (variant == Variant::kDisco) {
      require(!goals.empty(), ErrorCode::InvalidArgument, "no goals to evaluate");
      const DiscoGoal& goal =
          goals[goals.size() == 1 ? 0 : eval_rng.index(goals.size())];
      std::vector<double> vec(goal_vector_dim(goal));
      vectorize_goal(goal.omega, vec);
      const Rollout rollout = collect_episode(
          env_seed, train.m_objects, train.horizon,
          [&](const std::vector<double>& obs, int) {
            return to_action(deterministic_action(agent, augmented(obs, vec)));
          });
      distance.add(distance_to_goal(rollout.observations.back(), goal));
    } else if (variant == Variant::kConditionalDisco) {
      const std::vector<double> s_f =
          flatworld::sample_goal_observation(eval_rng, train.m_objects);
      std::vector<GaussianParams> omegas;
      for (const auto& joint : joints) omegas.push_back(joint.condition(s_f));
      const ActionSource act = [&agent](const std::vector<double>& obs,
                                        const GaussianParams& active, int) -> Action {
        std::vector<double> vec(replay::gaussian_omega_dim(active.dim()));
        replay::vectorize_gaussian(active, vec);
        return to_action(deterministic_action(agent, augmented(obs, vec)));
      };
      flatworld::TaskSpec task;
      task.final_state = s_f;
      const SequentialEvalResult result =
          evaluate_sequential(act, omegas, env_seed, task, train.horizon,
                              train.subtask_count, train.eval.latched);
      distance.add(math::norm(math::sub(result.final_observation, s_f)));
      if (!solved) solved.emplace();
      solved->add(result.solved);
    } else {
      const std::vector<double> goal =
          flatworld::sample_goal_observation(eval_rng, train.m_objects);
      FlatWorldState state = flatworld::reset(env_seed, train.m_objects);
      std::vector<bool> latched_flags(state.object_count(), false);
      auto latch = [&] {
        for (int j = 0; j < state.object_count(); ++j)
          if (flatworld::object_goal_distance(state, goal, j) < 1.0)
            latched_flags[j] = true;
      };
      latch();
      for (int t = 0; t < train.horizon; ++t) {
        const std::vector<double> obs = flatworld::observe(state);
        state = flatworld::step(
            state, to_action(deterministic_action(agent, augmented(obs, goal))));
        latch();
      }
      int count = 0;
      for (bool s : latched_flags)
        if (s) ++count;
      distance.add(math::norm(math::sub(flatworld::observe(state), goal)));
      if (!solved) solved.emplace();
      solved->add(count);
    }
  }

  if (solved)
    metrics.rows.push_back({0, 0, "tasks_solved", solved->mean(), solved->stddev()});
  metrics.rows.push_back(
      {0, 0, "final_distance", distance.mean(), distance.stddev()});
  return metrics;
}

void save_checkpoint(const std::string& path, const sac::SacAgent& agent,
                     const std::string& config_hash,
                     const std::vector<std::pair<std::string, std::string>>& rng_states) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::IoError, "cannot write checkpoint: " + path);
  sac::save_agent(out, agent, config_hash);
  const std::uint32_t count = static_cast<std::uint32_t>(rng_states.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& [name, state] : rng_states) {
    const std::uint32_t name_len = static_cast<std::uint32_t>(name.size());
    const std::uint32_t state_len = static_cast<std::uint32_t>(state.size());
    out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
    out.write(name.data(), name_len);
    out.write(reinterpret_cast<const char*>(&state_len), sizeof(state_len));
    out.write(state.data(), state_len);
  }
  require(out.good(), ErrorCode::IoError, "failed writing checkpoint: " + path);
}

sac::SacAgent load_checkpoint(const std::string& path, std::string* config_hash) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot open checkpoint: " + path);
  return sac::load_agent(in, config_hash);
}

}  // namespace disco::trainer
