// Command-line front end. Links only the public C API.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "disco/disco.h"

namespace {

int report(disco_status status) {
  if (status != DISCO_OK) std::fprintf(stderr, "error: %s\n", disco_last_error());
  return static_cast<int>(status);
}

// Multi-seed sweeps re-invoke this binary once per seed so every run owns a
// process, keeping seeds fully isolated.
int spawn_per_seed(const std::string& self, const std::string& args, std::int64_t lo,
                   std::int64_t hi) {
  for (std::int64_t seed = lo; seed <= hi; ++seed) {
    const std::string command = self + " " + args + " --seed " + std::to_string(seed);
    const int rc = std::system(command.c_str());
    if (rc != 0) return 2;
  }
  return 0;
}

bool parse_seed_range(const std::string& text, std::int64_t& lo, std::int64_t& hi) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) return false;
  try {
    lo = std::stoll(text.substr(0, dots));
    hi = std::stoll(text.substr(dots + 2));
  } catch (...) {
    return false;
  }
  return lo <= hi;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distribution-conditioned RL on the Flat World benchmark"};
  app.require_subcommand(1);

  // gen-examples -----------------------------------------------------------
  auto* gen = app.add_subcommand("gen-examples",
                                 "Write paired example sets, one file per sub-task");
  std::string gen_out = "examples_out";
  int gen_objects = 2, gen_subtasks = 2, gen_k = 30;
  double gen_noise = 0.01;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--m-objects", gen_objects, "Objects in the arena");
  gen->add_option("--subtasks", gen_subtasks, "Number of sub-tasks");
  gen->add_option("--k", gen_k, "Examples per sub-task");
  gen->add_option("--noise-std", gen_noise, "Recorded example noise level");
  gen->add_option("--seed", gen_seed, "Generation seed");

  // fit ----------------------------------------------------------------------
  auto* fit = app.add_subcommand("fit", "Fit goal-distribution parameters to examples");
  std::string fit_model = "gaussian", fit_in, fit_out = "params.json";
  double fit_epsilon = 0.25, fit_kappa = 100.0;
  std::uint64_t fit_seed = 0, fit_encoder_seed = 0;
  int fit_gmm_k = 4, fit_latent_dim = 4;
  fit->add_option("--model", fit_model, "gaussian|gmm|latent|joint");
  fit->add_option("--examples", fit_in, "Example-set file")->required();
  fit->add_option("--out", fit_out, "Parameter file to write");
  fit->add_option("--epsilon", fit_epsilon, "Precision threshold");
  fit->add_option("--kappa-max", fit_kappa, "Condition-number cap");
  fit->add_option("--seed", fit_seed, "Fitting-noise seed");
  fit->add_option("--gmm-k", fit_gmm_k, "Mixture components");
  fit->add_option("--latent-dim", fit_latent_dim, "Latent dimension");
  fit->add_option("--encoder-seed", fit_encoder_seed, "Synthetic encoder seed");

  // train / ablate ------------------------------------------------------------
  std::string train_config, train_out, train_seeds, train_variant, train_model;
  std::int64_t train_seed = -1;
  bool dry_run = false, desk_scale = false, paper_scale = false;
  auto* train = app.add_subcommand("train", "Train one run from a config file");
  train->add_option("--config", train_config, "Run configuration")->required();
  train->add_option("--variant", train_variant,
                    "disco|conditional-disco|her (overrides the config)");
  train->add_option("--model", train_model, "gaussian|gmm|latent (overrides)");
  train->add_option("--seed", train_seed, "Master seed (overrides the config)");
  train->add_option("--seeds", train_seeds, "Seed range N..M, one process per seed");
  train->add_option("--out", train_out, "Output directory override");
  train->add_flag("--dry-run", dry_run, "Validate the config and exit");
  train->add_flag("--desk-scale", desk_scale, "Desk-scale preset (default)");
  train->add_flag("--paper-scale", paper_scale, "Paper-scale preset");

  auto* ablate = app.add_subcommand("ablate", "Run the relabeling ablation arms");
  std::string ablate_config, ablate_out;
  std::int64_t ablate_seed = -1;
  bool ablate_paper = false;
  ablate->add_option("--config", ablate_config, "Run configuration")->required();
  ablate->add_option("--seed", ablate_seed, "Master seed");
  ablate->add_option("--out", ablate_out, "Output directory override");
  ablate->add_flag("--paper-scale", ablate_paper, "Paper-scale preset");

  // eval ----------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "Evaluate a stored checkpoint");
  std::string eval_dir, eval_out;
  std::uint64_t eval_seed = 1;
  int eval_episodes = 20;
  eval->add_option("--run", eval_dir, "Run directory (seed<N>)")->required();
  eval->add_option("--seed", eval_seed, "Evaluation seed");
  eval->add_option("--episodes", eval_episodes, "Evaluation episodes");
  eval->add_option("--out", eval_out, "Metrics CSV to write");

  // export --------------------------------------------------------------------
  auto* export_cmd = app.add_subcommand("export", "Aggregate per-seed metric CSVs");
  std::vector<std::string> export_inputs;
  std::string export_out = "curve.csv";
  export_cmd->add_option("--in", export_inputs, "Input metrics CSVs")->required();
  export_cmd->add_option("--out", export_out, "Aggregated curve file");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    if (gen_k < 2) {
      std::fprintf(stderr, "error: TooFewExamples: --k must be at least 2\n");
      return 1;
    }
    return report(disco_gen_examples(gen_out.c_str(), gen_objects, gen_subtasks, gen_k,
                                     gen_noise, gen_seed));
  }

  if (fit->parsed()) {
    char* summary = nullptr;
    const disco_status status =
        disco_fit_file(fit_model.c_str(), fit_in.c_str(), fit_out.c_str(), fit_epsilon,
                       fit_kappa, fit_seed, fit_gmm_k, fit_latent_dim,
                       fit_encoder_seed, &summary);
    if (status == DISCO_OK && summary) {
      std::printf("%s\n", summary);
      disco_string_free(summary);
    }
    return report(status);
  }

  if (train->parsed()) {
    const char* preset = paper_scale ? "paper-scale" : "desk-scale";
    if (!train_seeds.empty()) {
      std::int64_t lo = 0, hi = 0;
      if (!parse_seed_range(train_seeds, lo, hi)) {
        std::fprintf(stderr, "error: --seeds expects N..M\n");
        return 1;
      }
      std::string args = "train --config " + train_config;
      if (!train_out.empty()) args += " --out " + train_out;
      if (!train_variant.empty()) args += " --variant " + train_variant;
      if (!train_model.empty()) args += " --model " + train_model;
      if (paper_scale) args += " --paper-scale";
      return spawn_per_seed(argv[0], args, lo, hi);
    }
    return report(disco_train(train_config.c_str(), preset,
                              train_variant.empty() ? nullptr : train_variant.c_str(),
                              train_model.empty() ? nullptr : train_model.c_str(),
                              train_seed,
                              train_out.empty() ? nullptr : train_out.c_str(),
                              dry_run ? 1 : 0));
  }

  if (ablate->parsed()) {
    const char* preset = ablate_paper ? "paper-scale" : "desk-scale";
    return report(disco_ablate(ablate_config.c_str(), preset, ablate_seed,
                               ablate_out.empty() ? nullptr : ablate_out.c_str()));
  }

  if (eval->parsed()) {
    return report(disco_eval(eval_dir.c_str(), eval_seed, eval_episodes,
                             eval_out.empty() ? nullptr : eval_out.c_str()));
  }

  if (export_cmd->parsed()) {
    std::vector<const char*> paths;
    paths.reserve(export_inputs.size());
    for (const auto& p : export_inputs) paths.push_back(p.c_str());
    return report(disco_export(paths.data(), static_cast<int>(paths.size()),
                               export_out.c_str()));
  }

  return 1;
}
