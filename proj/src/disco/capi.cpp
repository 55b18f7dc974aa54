#include "disco/disco.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "disco/config.hpp"
#include "disco/distributions.hpp"
#include "disco/env.hpp"
#include "disco/runner.hpp"

namespace {

thread_local std::string g_last_error;

using disco::Error;
using disco::ErrorCode;

disco_status status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::TooFewExamples:
    case ErrorCode::UnpairedExamples:
    case ErrorCode::EmptySet:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::ConfigError:
      return DISCO_USAGE_ERROR;
    default:
      return DISCO_RUNTIME_ERROR;
  }
}

template <typename Fn>
disco_status guarded(Fn&& fn) {
  try {
    fn();
    return DISCO_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_for(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DISCO_RUNTIME_ERROR;
  }
}

}  // namespace

struct disco_env {
  int m_objects = 0;
  disco::flatworld::FlatWorldState state;
};

struct disco_gaussian {
  disco::dist::GaussianParams params;
  disco::dist::SmoothingConfig smoothing;
};

extern "C" {

const char* disco_last_error(void) { return g_last_error.c_str(); }

const char* disco_version(void) { return "0.1.0"; }

disco_status disco_env_new(int m_objects, uint64_t seed, disco_env** out) {
  return guarded([&] {
    disco::require(out != nullptr, ErrorCode::InvalidArgument, "null out pointer");
    auto env = std::make_unique<disco_env>();
    env->m_objects = m_objects;
    env->state = disco::flatworld::reset(seed, m_objects);
    *out = env.release();
  });
}

void disco_env_free(disco_env* env) { delete env; }

disco_status disco_env_reset(disco_env* env, uint64_t seed) {
  return guarded([&] {
    disco::require(env != nullptr, ErrorCode::InvalidArgument, "null env");
    env->state = disco::flatworld::reset(seed, env->m_objects);
  });
}

disco_status disco_env_step(disco_env* env, double dx, double dy, double grab) {
  return guarded([&] {
    disco::require(env != nullptr, ErrorCode::InvalidArgument, "null env");
    env->state = disco::flatworld::step(env->state, {dx, dy, grab});
  });
}

int disco_env_observation_dim(const disco_env* env) {
  return env ? disco::flatworld::observation_dim(env->m_objects) : 0;
}

disco_status disco_env_observe(const disco_env* env, double* out, int capacity) {
  return guarded([&] {
    disco::require(env != nullptr && out != nullptr, ErrorCode::InvalidArgument,
                   "null argument");
    const auto obs = disco::flatworld::observe(env->state);
    disco::require(capacity >= static_cast<int>(obs.size()),
                   ErrorCode::DimensionMismatch, "observation buffer too small");
    std::memcpy(out, obs.data(), obs.size() * sizeof(double));
  });
}

disco_status disco_env_tasks_solved(const disco_env* env, const double* final_state,
                                    int length, double radius, int* out) {
  return guarded([&] {
    disco::require(env && final_state && out, ErrorCode::InvalidArgument,
                   "null argument");
    disco::flatworld::TaskSpec task;
    task.final_state.assign(final_state, final_state + length);
    task.success_radius = radius;
    *out = disco::flatworld::tasks_solved(env->state, task);
  });
}

disco_status disco_gaussian_fit(const double* states, int count, int dim,
                                double noise_std, uint64_t seed, double epsilon,
                                double kappa_max, disco_gaussian** out) {
  return guarded([&] {
    disco::require(states && out, ErrorCode::InvalidArgument, "null argument");
    disco::require(dim >= 1, ErrorCode::InvalidArgument, "dimension must be positive");
    disco::dist::ExampleSet set;
    set.noise_std = noise_std;
    for (int i = 0; i < count; ++i)
      set.states.emplace_back(states + static_cast<std::ptrdiff_t>(i) * dim,
                              states + static_cast<std::ptrdiff_t>(i + 1) * dim);
    auto params = std::make_unique<disco_gaussian>();
    params->smoothing = {epsilon, kappa_max};
    disco::Rng rng = disco::derive_rng(seed, "fitting-noise");
    params->params = disco::dist::fit_gaussian_mle(set, rng, params->smoothing);
    *out = params.release();
  });
}

disco_status disco_gaussian_load(const char* path, disco_gaussian** out) {
  return guarded([&] {
    disco::require(path && out, ErrorCode::InvalidArgument, "null argument");
    auto params = std::make_unique<disco_gaussian>();
    params->params = disco::dist::load_gaussian_params(path);
    *out = params.release();
  });
}

disco_status disco_gaussian_save(const disco_gaussian* params, const char* path) {
  return guarded([&] {
    disco::require(params && path, ErrorCode::InvalidArgument, "null argument");
    disco::dist::save_gaussian_params(path, params->params, params->smoothing);
  });
}

void disco_gaussian_free(disco_gaussian* params) { delete params; }

int disco_gaussian_dim(const disco_gaussian* params) {
  return params ? params->params.dim() : 0;
}

disco_status disco_gaussian_mean(const disco_gaussian* params, double* out,
                                 int capacity) {
  return guarded([&] {
    disco::require(params && out, ErrorCode::InvalidArgument, "null argument");
    disco::require(capacity >= params->params.dim(), ErrorCode::DimensionMismatch,
                   "mean buffer too small");
    std::memcpy(out, params->params.mean.data(),
                params->params.mean.size() * sizeof(double));
  });
}

disco_status disco_gaussian_precision(const disco_gaussian* params, double* out,
                                      int capacity) {
  return guarded([&] {
    disco::require(params && out, ErrorCode::InvalidArgument, "null argument");
    const auto& precision = params->params.precision;
    const int n = precision.rows() * precision.cols();
    disco::require(capacity >= n, ErrorCode::DimensionMismatch,
                   "precision buffer too small");
    std::memcpy(out, precision.data().data(), n * sizeof(double));
  });
}

disco_status disco_gaussian_reward(const disco_gaussian* params, const double* state,
                                   int length, double* out) {
  return guarded([&] {
    disco::require(params && state && out, ErrorCode::InvalidArgument, "null argument");
    *out = disco::dist::gaussian_reward(std::span<const double>(state, length),
                                        params->params);
  });
}

int disco_gaussian_precision_psd(const disco_gaussian* params) {
  return params && params->params.precision_psd ? 1 : 0;
}

disco_status disco_gen_examples(const char* out_dir, int m_objects, int subtask_count,
                                int k, double noise_std, uint64_t seed) {
  return guarded([&] {
    disco::require(out_dir != nullptr, ErrorCode::InvalidArgument, "null out_dir");
    disco::runner::gen_examples(out_dir, m_objects, subtask_count, k, noise_std, seed);
  });
}

disco_status disco_fit_file(const char* model, const char* examples_path,
                            const char* params_out_path, double epsilon,
                            double kappa_max, uint64_t seed, int gmm_components,
                            int latent_dim, uint64_t encoder_seed, char** summary) {
  return guarded([&] {
    disco::require(model && examples_path && params_out_path,
                   ErrorCode::InvalidArgument, "null argument");
    disco::runner::FitOptions options;
    options.smoothing = {epsilon, kappa_max};
    options.seed = seed;
    options.gmm_components = gmm_components;
    options.encoder.latent_dim = latent_dim;
    options.encoder.seed = encoder_seed;
    const std::string text =
        disco::runner::fit_file(model, examples_path, params_out_path, options);
    if (summary) {
      *summary = static_cast<char*>(std::malloc(text.size() + 1));
      std::memcpy(*summary, text.c_str(), text.size() + 1);
    }
  });
}

disco_status disco_train(const char* config_path, const char* preset,
                         const char* variant, const char* model, int64_t seed,
                         const char* out_dir, int dry_run) {
  return guarded([&] {
    disco::require(config_path != nullptr, ErrorCode::InvalidArgument,
                   "null config path");
    disco::config::RunConfig cfg = disco::config::load_run_config(
        config_path, preset ? preset : "desk-scale");
    if (variant) cfg.variant = disco::trainer::variant_from_name(variant);
    if (model) cfg.model = disco::trainer::model_from_name(model);
    if (out_dir) cfg.out_dir = out_dir;
    cfg.validate();
    if (dry_run) return;
    const std::uint64_t run_seed =
        seed >= 0 ? static_cast<std::uint64_t>(seed) : cfg.seeds.front();
    disco::runner::train_one(cfg, run_seed);
  });
}

disco_status disco_eval(const char* run_dir, uint64_t eval_seed, int episodes,
                        const char* out_csv) {
  return guarded([&] {
    disco::require(run_dir != nullptr, ErrorCode::InvalidArgument, "null run dir");
    disco::runner::eval_run(run_dir, eval_seed, episodes, out_csv ? out_csv : "");
  });
}

disco_status disco_ablate(const char* config_path, const char* preset, int64_t seed,
                          const char* out_dir) {
  return guarded([&] {
    disco::require(config_path != nullptr, ErrorCode::InvalidArgument,
                   "null config path");
    disco::config::RunConfig cfg = disco::config::load_run_config(
        config_path, preset ? preset : "desk-scale");
    if (out_dir) cfg.out_dir = out_dir;
    const std::uint64_t run_seed =
        seed >= 0 ? static_cast<std::uint64_t>(seed) : cfg.seeds.front();
    disco::runner::ablate(cfg, run_seed);
  });
}

disco_status disco_export(const char* const* csv_paths, int count,
                          const char* out_path) {
  return guarded([&] {
    disco::require(csv_paths && out_path, ErrorCode::InvalidArgument, "null argument");
    std::vector<std::string> paths;
    for (int i = 0; i < count; ++i) paths.emplace_back(csv_paths[i]);
    disco::runner::export_curves(paths, out_path);
  });
}

void disco_string_free(char* text) { std::free(text); }

}  // extern "C"
