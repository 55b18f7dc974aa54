#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "disco/distributions.hpp"
#include "disco/rng.hpp"

namespace disco::flatworld {

// Enclosed 8x8 arena. A cursor moves at most one unit per axis per step and
// can hold at most one object; a held object moves rigidly with the cursor.
inline constexpr double kArenaMin = 0.0;
inline constexpr double kArenaMax = 8.0;
inline constexpr double kMaxStepPerAxis = 1.0;
// Grab reach is closed (<= 1); the success radius below is open (< 1). The
// boundary conventions are fixed here and tested explicitly.
inline constexpr double kGrabRadius = 1.0;
inline constexpr double kDefaultSuccessRadius = 1.0;

using Point = std::array<double, 2>;

struct Action {
  double dx = 0.0;
  double dy = 0.0;
  double grab = -1.0;

  Action clamped() const;
};

struct FlatWorldState {
  Point cursor{0.0, 0.0};
  std::vector<Point> objects;
  std::optional<int> held;
  // Object-minus-cursor offset captured at grab time; meaningful only while
  // `held` is set.
  Point held_offset{0.0, 0.0};

  int object_count() const { return static_cast<int>(objects.size()); }
};

// A full desired final observation plus the radius at which an object counts
// as placed.
struct TaskSpec {
  std::vector<double> final_state;
  double success_radius = kDefaultSuccessRadius;
};

int observation_dim(int m_objects);

// Cursor and objects i.i.d. uniform over the arena; nothing held.
FlatWorldState reset(std::uint64_t seed, int m_objects);

// Pure transition function; all inputs are clamped, so it cannot fail.
FlatWorldState step(const FlatWorldState& state, const Action& action);

// [cursor, object_1, ..., object_M]; the held flag is not observable.
std::vector<double> observe(const FlatWorldState& state);

// Uniform random full observation (used for goals s_f and HER relabels).
std::vector<double> sample_goal_observation(Rng& rng, int m_objects);

// Paired example states for sub-task i: s_f is a uniform random observation
// and s places object i exactly at its s_f location with everything else
// uniform. Stands in for human-provided example sets.
dist::ExampleSet gen_subtask_examples(int object_index, int k, std::uint64_t seed,
                                      int m_objects, double noise_std = 0.01);

// Number of objects strictly inside success_radius of their goal positions.
int tasks_solved(const FlatWorldState& state, const TaskSpec& task);

// r(s, s_g) = -||s - s_g||.
double oracle_goal_reward(std::span<const double> obs, std::span<const double> goal);

// Distance of one object to its location in a full goal observation.
double object_goal_distance(const FlatWorldState& state,
                            std::span<const double> final_state, int object_index);

// --- trajectory dump (structured text, for replay and debugging) ---------

struct TrajectoryDump {
  std::uint64_t seed = 0;
  int m_objects = 0;
  std::vector<std::vector<double>> observations;
  std::vector<Action> actions;
  std::vector<int> held_flags;  // -1 when nothing held
};

std::string trajectory_to_json(const TrajectoryDump& dump);
TrajectoryDump trajectory_from_json(const std::string& text);

}  // namespace disco::flatworld
