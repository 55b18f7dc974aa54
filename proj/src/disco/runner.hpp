#pragma once

#include <string>
#include <vector>

#include "disco/config.hpp"
#include "disco/trainer.hpp"

namespace disco::runner {

// Writes one paired example-set file per sub-task (subtask_<i>.json).
// Returns the written paths.
std::vector<std::string> gen_examples(const std::string& out_dir, int m_objects,
                                      int subtask_count, int k, double noise_std,
                                      std::uint64_t seed);

// Fits `model` (gaussian | gmm | latent | joint) to an example-set file and
// writes the parameter document. Returns a human-readable summary.
struct FitOptions {
  dist::SmoothingConfig smoothing;
  std::uint64_t seed = 0;
  int gmm_components = 4;
  int gmm_restarts = 5;
  config::EncoderConfig encoder;
};
std::string fit_file(const std::string& model, const std::string& examples_path,
                     const std::string& params_out_path, const FitOptions& options);

struct RunOutputs {
  trainer::RunMetrics metrics;
  std::string run_dir;
  std::string metrics_path;
  std::string summary_path;
  std::string checkpoint_path;
};

// Trains one seed of the configured run and writes metrics.csv, summary.json
// and checkpoint.bin under <out_dir>/seed<seed>/.
RunOutputs train_one(const config::RunConfig& config, std::uint64_t seed);

// In-memory variant used by tests and the acceptance suite (no files).
trainer::RunMetrics train_in_memory(const config::RunConfig& config, std::uint64_t seed,
                                    trainer::TrainedState* trained = nullptr);

// Re-evaluates a finished run directory with a fresh seed; writes a metrics
// CSV when out_csv is non-empty.
trainer::RunMetrics eval_run(const std::string& run_dir, std::uint64_t eval_seed,
                             int episodes, const std::string& out_csv);

// Runs the three relabeling arms at one seed; writes per-arm directories.
std::vector<std::string> ablate(const config::RunConfig& config, std::uint64_t seed);

// Aggregates per-seed metric CSVs of one method into mean/std curves.
void export_curves(const std::vector<std::string>& csv_paths,
                   const std::string& out_path);

// Resolved task inputs for a run (fitted goals or joints).
struct ResolvedTasks {
  std::vector<trainer::DiscoGoal> goals;
  std::vector<dist::SubtaskConditioner> joints;
};
ResolvedTasks resolve_tasks(const config::RunConfig& config, std::uint64_t master_seed);

}  // namespace disco::runner
