#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "disco/distributions.hpp"
#include "disco/replay.hpp"
#include "disco/sac.hpp"
#include "disco/trainer.hpp"

namespace disco::config {

// Where the per-sub-task example sets come from: explicit files, or
// deterministic on-the-fly generation.
struct SubtaskSource {
  std::vector<std::string> files;
  bool generate = false;
  int k = 30;
  double noise_std = 0.01;
  std::uint64_t seed = 0;
};

// Hand-specified Gaussian goal (the reach task): mean plus either the
// identity precision or explicit rows.
struct HandGoal {
  std::vector<double> mean;
  std::vector<std::vector<double>> precision_rows;  // empty -> identity
};

// Synthetic stand-in for a trained VAE encoder: a seeded affine map with
// fixed per-dimension posterior variances.
struct EncoderConfig {
  int latent_dim = 4;
  std::uint64_t seed = 0;
};

struct RunConfig {
  trainer::Variant variant = trainer::Variant::kConditionalDisco;
  trainer::GoalModel model = trainer::GoalModel::kGaussian;
  trainer::TrainConfig train;
  sac::SacConfig sac;
  double p_relabel = 0.8;
  double future_fraction = 0.4;
  double random_fraction = 0.4;
  bool mean_relabel = true;
  bool covariance_relabel = true;
  dist::SmoothingConfig smoothing;
  SubtaskSource subtasks;
  std::optional<HandGoal> goal;
  EncoderConfig encoder;
  int gmm_components = 4;
  int gmm_restarts = 5;
  std::string out_dir = "runs";
  std::vector<std::uint64_t> seeds = {0};

  replay::RelabelConfig relabel_config() const;
  void validate() const;
};

// desk: 2-object arena, batch 256, hidden [128,128], 2e5-transition buffer.
// paper: 4 objects, batch 2048, hidden [400,300], 1e6-transition buffer.
RunConfig desk_preset();
RunConfig paper_preset();
RunConfig preset_by_name(const std::string& name);

// Parses a config document on top of a preset; unknown keys anywhere are
// rejected.
RunConfig parse_run_config(const std::string& json_text, const RunConfig& base);
RunConfig load_run_config(const std::string& path, const std::string& preset);

// Canonical serialization of the resolved config (sorted keys, fixed layout).
std::string canonical_json(const RunConfig& config);

// FNV-1a hash of the canonical form with the seed list removed, so all seeds
// of one configuration share a hash.
std::string config_hash(const RunConfig& config);

dist::Encoder make_synthetic_encoder(const EncoderConfig& encoder, int state_dim);

}  // namespace disco::config
