#include "disco/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace disco::flatworld {

namespace {

double clamp_unit(double v) { return std::clamp(v, -kMaxStepPerAxis, kMaxStepPerAxis); }

double clamp_arena(double v) { return std::clamp(v, kArenaMin, kArenaMax); }

double distance(const Point& a, const Point& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

}  // namespace

Action Action::clamped() const {
  Action a;
  a.dx = clamp_unit(std::isfinite(dx) ? dx : 0.0);
  a.dy = clamp_unit(std::isfinite(dy) ? dy : 0.0);
  a.grab = std::clamp(std::isfinite(grab) ? grab : -1.0, -1.0, 1.0);
  return a;
}

int observation_dim(int m_objects) { return 2 + 2 * m_objects; }

FlatWorldState reset(std::uint64_t seed, int m_objects) {
  require(m_objects >= 0, ErrorCode::InvalidArgument, "negative object count");
  Rng rng(seed);
  FlatWorldState state;
  state.cursor = {rng.uniform(kArenaMin, kArenaMax), rng.uniform(kArenaMin, kArenaMax)};
  state.objects.resize(m_objects);
  for (auto& obj : state.objects)
    obj = {rng.uniform(kArenaMin, kArenaMax), rng.uniform(kArenaMin, kArenaMax)};
  return state;
}

FlatWorldState step(const FlatWorldState& state, const Action& action) {
  const Action a = action.clamped();
  FlatWorldState next = state;

  // Displacement clamps against the wall for the cursor first; while holding,
  // the held object further restricts it so the rigid pair stays inside.
  double dx = a.dx;
  double dy = a.dy;
  dx = std::clamp(dx, kArenaMin - state.cursor[0], kArenaMax - state.cursor[0]);
  dy = std::clamp(dy, kArenaMin - state.cursor[1], kArenaMax - state.cursor[1]);
  if (state.held) {
    const Point& obj = state.objects[*state.held];
    dx = std::clamp(dx, kArenaMin - obj[0], kArenaMax - obj[0]);
    dy = std::clamp(dy, kArenaMin - obj[1], kArenaMax - obj[1]);
  }
  next.cursor = {state.cursor[0] + dx, state.cursor[1] + dy};
  next.cursor = {clamp_arena(next.cursor[0]), clamp_arena(next.cursor[1])};

  if (state.held) {
    // Rigid transport: position is cursor + offset captured at grab time.
    next.objects[*state.held] = {next.cursor[0] + state.held_offset[0],
                                 next.cursor[1] + state.held_offset[1]};
  }

  if (a.grab > 0.0) {
    if (!next.held) {
      // Closest object within reach; exact ties break to the lowest index.
      int best = -1;
      double best_dist = std::numeric_limits<double>::infinity();
      for (int i = 0; i < next.object_count(); ++i) {
        const double d = distance(next.cursor, next.objects[i]);
        if (d <= kGrabRadius && d < best_dist) {
          best = i;
          best_dist = d;
        }
      }
      if (best >= 0) {
        next.held = best;
        next.held_offset = {next.objects[best][0] - next.cursor[0],
                            next.objects[best][1] - next.cursor[1]};
      }
    }
    // Already holding: keep the current object; no swapping.
  } else {
    next.held.reset();
  }
  return next;
}

std::vector<double> observe(const FlatWorldState& state) {
  std::vector<double> obs;
  obs.reserve(observation_dim(state.object_count()));
  obs.push_back(state.cursor[0]);
  obs.push_back(state.cursor[1]);
  for (const auto& obj : state.objects) {
    obs.push_back(obj[0]);
    obs.push_back(obj[1]);
  }
  return obs;
}

std::vector<double> sample_goal_observation(Rng& rng, int m_objects) {
  std::vector<double> goal(observation_dim(m_objects));
  for (double& v : goal) v = rng.uniform(kArenaMin, kArenaMax);
  return goal;
}

dist::ExampleSet gen_subtask_examples(int object_index, int k, std::uint64_t seed,
                                      int m_objects, double noise_std) {
  require(object_index >= 0 && object_index < m_objects, ErrorCode::IndexOutOfRange,
          "sub-task object index out of range");
  require(k >= 2, ErrorCode::TooFewExamples, "need at least 2 example pairs");

  Rng rng(seed);
  dist::ExampleSet set;
  set.noise_std = noise_std;
  for (int i = 0; i < k; ++i) {
    std::vector<double> s_f = sample_goal_observation(rng, m_objects);
    std::vector<double> s = sample_goal_observation(rng, m_objects);
    // Object `object_index` sits exactly at its final location; everything
    // else (cursor included) is unconstrained.
    s[2 + 2 * object_index] = s_f[2 + 2 * object_index];
    s[3 + 2 * object_index] = s_f[3 + 2 * object_index];
    set.states.push_back(std::move(s));
    set.final_states.push_back(std::move(s_f));
  }
  return set;
}

double object_goal_distance(const FlatWorldState& state,
                            std::span<const double> final_state, int object_index) {
  require(object_index >= 0 && object_index < state.object_count(),
          ErrorCode::IndexOutOfRange, "object index out of range");
  require(static_cast<int>(final_state.size()) ==
              observation_dim(state.object_count()),
          ErrorCode::DimensionMismatch, "final state dimension mismatch");
  const Point goal{final_state[2 + 2 * object_index], final_state[3 + 2 * object_index]};
  return distance(state.objects[object_index], goal);
}

int tasks_solved(const FlatWorldState& state, const TaskSpec& task) {
  require(static_cast<int>(task.final_state.size()) ==
              observation_dim(state.object_count()),
          ErrorCode::DimensionMismatch, "task dimension does not match state");
  int solved = 0;
  for (int i = 0; i < state.object_count(); ++i)
    if (object_goal_distance(state, task.final_state, i) < task.success_radius)
      ++solved;
  return solved;
}

double oracle_goal_reward(std::span<const double> obs, std::span<const double> goal) {
  require(obs.size() == goal.size(), ErrorCode::DimensionMismatch,
          "observation/goal dimensions differ");
  return -math::norm(math::sub(obs, goal));
}

using nlohmann::json;

std::string trajectory_to_json(const TrajectoryDump& dump) {
  json doc;
  doc["seed"] = dump.seed;
  doc["m_objects"] = dump.m_objects;
  json records = json::array();
  for (std::size_t t = 0; t < dump.actions.size(); ++t) {
    json rec;
    rec["t"] = t;
    rec["observation"] = dump.observations[t];
    rec["action"] = {dump.actions[t].dx, dump.actions[t].dy, dump.actions[t].grab};
    rec["held"] = dump.held_flags[t];
    records.push_back(std::move(rec));
  }
  if (dump.observations.size() > dump.actions.size()) {
    json rec;
    rec["t"] = dump.actions.size();
    rec["observation"] = dump.observations.back();
    rec["held"] = dump.held_flags.empty() ? -1 : dump.held_flags.back();
    records.push_back(std::move(rec));
  }
  doc["records"] = std::move(records);
  return doc.dump(2) + "\n";
}

TrajectoryDump trajectory_from_json(const std::string& text) {
  const json doc = json::parse(text);
  TrajectoryDump dump;
  dump.seed = doc.at("seed").get<std::uint64_t>();
  dump.m_objects = doc.at("m_objects").get<int>();
  for (const auto& rec : doc.at("records")) {
    dump.observations.push_back(rec.at("observation").get<std::vector<double>>());
    dump.held_flags.push_back(rec.at("held").get<int>());
    if (rec.contains("action")) {
      const auto a = rec.at("action").get<std::vector<double>>();
      dump.actions.push_back({a[0], a[1], a[2]});
    }
  }
  return dump;
}

}  // namespace disco::flatworld
