#include "disco/replay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace disco::replay {

int ConditionalTask::subtask_at(int t) const {
  require(!schedule.empty(), ErrorCode::InvalidTrajectory, "empty sub-task schedule");
  if (segment_length <= 0) return schedule.front();
  const int segment = std::min(t / segment_length,
                               static_cast<int>(schedule.size()) - 1);
  return schedule[segment];
}

const GaussianParams& ConditionalTask::omega_at(int t) const {
  const int i = subtask_at(t);
  require(i >= 0 && i < static_cast<int>(omegas.size()), ErrorCode::MissingJoint,
          "no conditioned parameters for sub-task");
  return omegas[i];
}

void StoredTrajectory::validate() const {
  require(!actions.empty(), ErrorCode::InvalidTrajectory, "trajectory has no actions");
  require(observations.size() == actions.size() + 1, ErrorCode::InvalidTrajectory,
          "need H+1 observations for H actions");
  const std::size_t obs_dim = observations.front().size();
  for (const auto& o : observations)
    require(o.size() == obs_dim, ErrorCode::InvalidTrajectory,
            "inconsistent observation dimensions");
  if (const auto* gaussian = std::get_if<GaussianParams>(&omega))
    require(gaussian->dim() == static_cast<int>(obs_dim), ErrorCode::InvalidTrajectory,
            "omega dimension does not match observations");
}

void ReplayBuffer::add_to_pool(const GaussianParams& params) {
  for (const auto& entry : pool_) {
    if (entry.source_task >= 0 && entry.source_task == params.source_task) return;
    if (entry.cov == params.cov && entry.precision == params.precision) return;
  }
  pool_.push_back({params.cov, params.precision, params.precision_psd,
                   params.source_task});
}

void ReplayBuffer::store(StoredTrajectory trajectory) {
  trajectory.validate();
  if (const auto* gaussian = std::get_if<GaussianParams>(&trajectory.omega)) {
    add_to_pool(*gaussian);
  } else if (const auto* task = std::get_if<ConditionalTask>(&trajectory.omega)) {
    for (const auto& omega : task->omegas) add_to_pool(omega);
  }

  transitions_ += trajectory.horizon();
  trajectories_.push_back(std::move(trajectory));
  insertions_ += 1;
  while (transitions_ > capacity_ && trajectories_.size() > 1) {
    transitions_ -= trajectories_.front().horizon();
    trajectories_.pop_front();
  }
}

FutureSample sample_with_future(const ReplayBuffer& buffer, Rng& rng) {
  require(!buffer.empty(), ErrorCode::EmptyBuffer, "cannot sample an empty buffer");
  FutureSample sample;
  sample.trajectory = &buffer.trajectory(rng.index(buffer.size_trajectories()));
  const int horizon = sample.trajectory->horizon();
  sample.t = static_cast<int>(rng.index(horizon));
  sample.h = sample.t + 1 + static_cast<int>(rng.index(horizon - sample.t));
  return sample;
}

void RelabelConfig::validate() const {
  require(p_relabel >= 0.0 && p_relabel <= 1.0, ErrorCode::ConfigError,
          "p_relabel outside [0,1]");
  require(future_fraction >= 0.0 && random_fraction >= 0.0 &&
              future_fraction + random_fraction <= 1.0 + 1e-12,
          ErrorCode::ConfigError, "relabel fractions must be a sub-probability");
}

GaussianParams relabel_disco(const GaussianParams& omega, std::span<const double> s_h,
                             const ReplayBuffer& buffer, Rng& rng,
                             const RelabelConfig& config) {
  require(static_cast<int>(s_h.size()) == omega.dim(), ErrorCode::DimensionMismatch,
          "future state dimension does not match omega");
  if (!rng.bernoulli(config.p_relabel)) return omega;
  if (!config.mean_relabel && !config.covariance_relabel) return omega;

  GaussianParams out = omega;
  if (config.mean_relabel) out.mean.assign(s_h.begin(), s_h.end());
  if (config.covariance_relabel) {
    const auto& pool = buffer.covariance_pool();
    require(!pool.empty(), ErrorCode::EmptyBuffer,
            "no stored covariance available for re-sampling");
    const auto& entry = pool[rng.index(pool.size())];
    out.cov = entry.cov;
    out.precision = entry.precision;
    out.precision_psd = entry.precision_psd;
    out.source_task = entry.source_task;
  }
  return out;
}

GaussianParams relabel_conditional(const GaussianParams& omega,
                                   std::span<const double> s_h,
                                   const std::vector<dist::SubtaskConditioner>& joints,
                                   Rng& rng, const RelabelConfig& config) {
  require(!joints.empty(), ErrorCode::MissingJoint, "no fitted joints available");

  const double draw = rng.uniform();
  const bool use_future = draw < config.future_fraction;
  const bool use_random =
      !use_future && draw < config.future_fraction + config.random_fraction;
  if (!use_future && !use_random) return omega;
  // With both ablation switches off a fired branch has nothing to change,
  // which is exactly the p_relabel = 0 behavior.
  if (!config.mean_relabel && !config.covariance_relabel) return omega;

  // Covariance relabel re-samples the sub-task; otherwise stay on the task
  // the data was collected for.
  std::size_t subtask = 0;
  if (config.covariance_relabel) {
    subtask = rng.index(joints.size());
  } else {
    require(omega.source_task >= 0 &&
                omega.source_task < static_cast<int>(joints.size()),
            ErrorCode::MissingJoint, "omega does not name its source sub-task");
    subtask = static_cast<std::size_t>(omega.source_task);
  }
  const dist::SubtaskConditioner& conditioner = joints[subtask];

  if (!config.mean_relabel) {
    // Only the covariance moves; the conditional covariance is independent of
    // the conditioning target, so no target needs to be drawn.
    GaussianParams out = conditioner.base();
    out.mean = omega.mean;
    return out;
  }

  std::vector<double> target;
  if (use_future) {
    target.assign(s_h.begin(), s_h.end());
  } else {
    require(static_cast<bool>(config.sample_random_goal), ErrorCode::ConfigError,
            "random-goal sampler not configured");
    target = config.sample_random_goal(rng);
  }

  GaussianParams out = conditioner.condition(target);
  return out;
}

std::vector<double> relabel_her(std::span<const double> goal,
                                std::span<const double> s_h, Rng& rng,
                                const RelabelConfig& config) {
  require(goal.size() == s_h.size(), ErrorCode::DimensionMismatch,
          "goal and future state dimensions differ");
  const double draw = rng.uniform();
  if (draw < config.future_fraction) return {s_h.begin(), s_h.end()};
  if (draw < config.future_fraction + config.random_fraction) {
    require(static_cast<bool>(config.sample_random_goal), ErrorCode::ConfigError,
            "random-goal sampler not configured");
    return config.sample_random_goal(rng);
  }
  return {goal.begin(), goal.end()};
}

TransitionBatch assemble_batch(const ReplayBuffer& buffer, int batch_size,
                               const BatchHooks& hooks, Rng& rng) {
  require(!buffer.empty(), ErrorCode::EmptyBuffer, "cannot assemble from an empty buffer");
  require(batch_size >= 1, ErrorCode::InvalidArgument, "batch size must be positive");
  require(static_cast<bool>(hooks.relabel) && static_cast<bool>(hooks.reward) &&
              static_cast<bool>(hooks.vectorize),
          ErrorCode::InvalidArgument,
          "batch hooks incomplete");

  const int obs_dim =
      static_cast<int>(buffer.trajectory(0).observations.front().size());
  const int action_dim = static_cast<int>(buffer.trajectory(0).actions.front().size());
  const int aug_dim = obs_dim + hooks.omega_dim;

  TransitionBatch batch;
  batch.augmented_obs.resize(batch_size, aug_dim);
  batch.actions.resize(batch_size, action_dim);
  batch.augmented_next.resize(batch_size, aug_dim);
  batch.rewards.resize(batch_size);

  std::vector<double> omega_vec(hooks.omega_dim);
  for (int row = 0; row < batch_size; ++row) {
    const FutureSample sample = sample_with_future(buffer, rng);
    const auto& traj = *sample.trajectory;
    const auto& s_t = traj.observations[sample.t];
    const auto& s_next = traj.observations[sample.t + 1];
    const auto& s_h = traj.observations[sample.h];

    const Omega context = hooks.relabel(buffer, traj, sample.t, s_h, rng);
    batch.rewards(row) = hooks.reward(s_t, context);
    hooks.vectorize(context, omega_vec);

    for (int i = 0; i < obs_dim; ++i) {
      batch.augmented_obs(row, i) = s_t[i];
      batch.augmented_next(row, i) = s_next[i];
    }
    for (int i = 0; i < hooks.omega_dim; ++i) {
      batch.augmented_obs(row, obs_dim + i) = omega_vec[i];
      batch.augmented_next(row, obs_dim + i) = omega_vec[i];
    }
    for (int i = 0; i < action_dim; ++i)
      batch.actions(row, i) = traj.actions[sample.t][i];
  }
  return batch;
}

namespace {

using nlohmann::json;

json omega_to_json(const Omega& omega) {
  json doc;
  if (const auto* gaussian = std::get_if<GaussianParams>(&omega)) {
    doc = json::parse(dist::gaussian_params_to_json(*gaussian, {}));
    doc["kind"] = "gaussian";
    doc["source_task"] = gaussian->source_task;
  } else if (const auto* gmm = std::get_if<dist::GmmParams>(&omega)) {
    doc = json::parse(dist::gmm_params_to_json(*gmm, {}));
    doc["kind"] = "gmm";
  } else if (const auto* latent = std::get_if<dist::LatentGaussianParams>(&omega)) {
    doc = json::parse(dist::latent_params_to_json(*latent));
    doc["kind"] = "latent";
  } else if (const auto* task = std::get_if<ConditionalTask>(&omega)) {
    doc["kind"] = "conditional";
    doc["s_f"] = task->s_f;
    doc["schedule"] = task->schedule;
    doc["segment_length"] = task->segment_length;
    json omegas = json::array();
    for (const auto& o : task->omegas) {
      json entry = json::parse(dist::gaussian_params_to_json(o, {}));
      entry["source_task"] = o.source_task;
      omegas.push_back(std::move(entry));
    }
    doc["omegas"] = std::move(omegas);
  } else {
    doc["kind"] = "goal";
    doc["goal"] = std::get<GoalVector>(omega).goal;
  }
  return doc;
}

GaussianParams gaussian_from_json_doc(const json& doc) {
  GaussianParams params = dist::gaussian_params_from_json(doc.dump());
  params.source_task = doc.value("source_task", -1);
  return params;
}

Omega omega_from_json(const json& doc) {
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "gaussian") return gaussian_from_json_doc(doc);
  if (kind == "gmm") return dist::gmm_params_from_json(doc.dump());
  if (kind == "latent") return dist::latent_params_from_json(doc.dump());
  if (kind == "conditional") {
    ConditionalTask task;
    task.s_f = doc.at("s_f").get<std::vector<double>>();
    task.schedule = doc.at("schedule").get<std::vector<int>>();
    task.segment_length = doc.at("segment_length").get<int>();
    for (const auto& entry : doc.at("omegas"))
      task.omegas.push_back(gaussian_from_json_doc(entry));
    return task;
  }
  if (kind == "goal") return GoalVector{doc.at("goal").get<std::vector<double>>()};
  throw Error(ErrorCode::IoError, "unknown context kind: " + kind);
}

}  // namespace

std::string buffer_to_json(const ReplayBuffer& buffer) {
  json doc;
  doc["transitions"] = buffer.size_transitions();
  json trajectories = json::array();
  for (std::size_t i = 0; i < buffer.size_trajectories(); ++i) {
    const StoredTrajectory& traj = buffer.trajectory(i);
    json records = json::array();
    for (std::size_t t = 0; t < traj.actions.size(); ++t) {
      json rec;
      rec["t"] = t;
      rec["observation"] = traj.observations[t];
      rec["action"] = traj.actions[t];
      records.push_back(std::move(rec));
    }
    json last;
    last["t"] = traj.actions.size();
    last["observation"] = traj.observations.back();
    records.push_back(std::move(last));
    json entry;
    entry["records"] = std::move(records);
    entry["omega"] = omega_to_json(traj.omega);
    trajectories.push_back(std::move(entry));
  }
  doc["trajectories"] = std::move(trajectories);
  return doc.dump(2) + "\n";
}

void save_buffer(const std::string& path, const ReplayBuffer& buffer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::IoError, "cannot write " + path);
  out << buffer_to_json(buffer);
}

ReplayBuffer load_buffer(const std::string& path, std::size_t capacity_transitions) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  const json doc = json::parse(text.str());

  ReplayBuffer buffer(capacity_transitions);
  for (const auto& entry : doc.at("trajectories")) {
    StoredTrajectory traj;
    for (const auto& rec : entry.at("records")) {
      traj.observations.push_back(rec.at("observation").get<std::vector<double>>());
      if (rec.contains("action"))
        traj.actions.push_back(rec.at("action").get<std::vector<double>>());
    }
    traj.omega = omega_from_json(entry.at("omega"));
    buffer.store(std::move(traj));
  }
  return buffer;
}

int gaussian_omega_dim(int state_dim) {
  return state_dim + state_dim * (state_dim + 1) / 2;
}

void vectorize_gaussian(const GaussianParams& params, std::span<double> out) {
  const int n = params.dim();
  require(static_cast<int>(out.size()) == gaussian_omega_dim(n),
          ErrorCode::DimensionMismatch, "omega vector size mismatch");
  int k = 0;
  for (int i = 0; i < n; ++i) out[k++] = params.mean[i];
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) out[k++] = params.precision(i, j);
}

}  // namespace disco::replay
