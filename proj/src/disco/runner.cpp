#include "disco/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "disco/env.hpp"

namespace disco::runner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& text) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::IoError, "cannot write " + path);
  out << text;
}

std::string format_double(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

// Hash of a command's effective arguments, embedded in its output files.
std::string args_hash(const json& args) {
  char buffer[20];
  std::snprintf(buffer, sizeof(buffer), "%016llx",
                static_cast<unsigned long long>(fnv1a64(args.dump())));
  return buffer;
}

}  // namespace

std::vector<std::string> gen_examples(const std::string& out_dir, int m_objects,
                                      int subtask_count, int k, double noise_std,
                                      std::uint64_t seed) {
  require(subtask_count >= 1 && subtask_count <= m_objects, ErrorCode::InvalidArgument,
          "sub-task count must be between 1 and the object count");
  std::vector<std::string> paths;
  fs::create_directories(out_dir);
  const std::string hash = args_hash({{"command", "gen-examples"},
                                      {"m_objects", m_objects},
                                      {"subtasks", subtask_count},
                                      {"k", k},
                                      {"noise_std", noise_std},
                                      {"seed", seed}});
  for (int i = 0; i < subtask_count; ++i) {
    const std::uint64_t subtask_seed = derive_seed(seed, "gen-examples", i);
    const dist::ExampleSet set =
        flatworld::gen_subtask_examples(i, k, subtask_seed, m_objects, noise_std);
    const std::string path = (fs::path(out_dir) / ("subtask_" + std::to_string(i) + ".json")).string();
    dist::save_example_set(path, set, subtask_seed, hash);
    paths.push_back(path);
  }
  return paths;
}

std::string fit_file(const std::string& model, const std::string& examples_path,
                     const std::string& params_out_path, const FitOptions& options) {
  const dist::ExampleSet set = dist::load_example_set(examples_path);
  Rng rng = derive_rng(options.seed, "fitting-noise");
  std::ostringstream summary;
  const std::string hash = args_hash({{"command", "fit"},
                                      {"model", model},
                                      {"epsilon", options.smoothing.epsilon},
                                      {"kappa_max", options.smoothing.kappa_max},
                                      {"seed", options.seed},
                                      {"gmm_components", options.gmm_components},
                                      {"latent_dim", options.encoder.latent_dim},
                                      {"encoder_seed", options.encoder.seed}});

  if (model == "gaussian") {
    const dist::GaussianParams params =
        dist::fit_gaussian_mle(set, rng, options.smoothing);
    write_file(params_out_path,
               dist::gaussian_params_to_json(params, options.smoothing, hash));
    summary << "gaussian fit: dim=" << params.dim()
            << " precision_psd=" << (params.precision_psd ? "yes" : "no")
            << "\nprecision zero pattern:\n";
    for (int i = 0; i < params.dim(); ++i) {
      for (int j = 0; j < params.dim(); ++j)
        summary << (params.precision(i, j) == 0.0 ? '.' : 'x');
      summary << '\n';
    }
  } else if (model == "gmm") {
    dist::GmmFitConfig fit;
    fit.components = options.gmm_components;
    fit.restarts = options.gmm_restarts;
    const dist::GmmParams params = dist::fit_gmm_em(set, rng, fit, options.smoothing);
    write_file(params_out_path, dist::gmm_params_to_json(params, options.smoothing, hash));
    summary << "gmm fit: dim=" << params.dim() << " components="
            << params.components.size() << " weights=[";
    for (std::size_t j = 0; j < params.weights.size(); ++j)
      summary << (j ? "," : "") << format_double(params.weights[j]);
    summary << "]";
  } else if (model == "latent") {
    const dist::Encoder encoder =
        config::make_synthetic_encoder(options.encoder, set.dim());
    std::vector<dist::GaussianPosterior> posteriors;
    posteriors.reserve(set.states.size());
    for (const auto& s : set.states) posteriors.push_back(encoder(s));
    const dist::LatentGaussianParams params = dist::moment_match(posteriors);
    write_file(params_out_path, dist::latent_params_to_json(params, hash));
    summary << "latent fit: d_z=" << params.dim();
  } else if (model == "joint") {
    const dist::JointGaussianParams params = dist::fit_joint_gaussian(set, rng);
    write_file(params_out_path, dist::joint_params_to_json(params, hash));
    summary << "joint fit: half_dim=" << params.half_dim;
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown model: " + model);
  }
  return summary.str();
}

namespace {

std::vector<dist::ExampleSet> load_subtask_sets(const config::RunConfig& cfg) {
  std::vector<dist::ExampleSet> sets;
  if (cfg.subtasks.generate) {
    for (int i = 0; i < cfg.train.subtask_count; ++i)
      sets.push_back(flatworld::gen_subtask_examples(
          i, cfg.subtasks.k, derive_seed(cfg.subtasks.seed, "gen-examples", i),
          cfg.train.m_objects, cfg.subtasks.noise_std));
  } else {
    for (const auto& path : cfg.subtasks.files)
      sets.push_back(dist::load_example_set(path));
  }
  return sets;
}

}  // namespace

ResolvedTasks resolve_tasks(const config::RunConfig& cfg, std::uint64_t master_seed) {
  ResolvedTasks tasks;
  Rng fit_rng = derive_rng(master_seed, "fitting-noise");

  if (cfg.variant == trainer::Variant::kHer) return tasks;

  if (cfg.variant == trainer::Variant::kConditionalDisco) {
    const auto sets = load_subtask_sets(cfg);
    require(static_cast<int>(sets.size()) == cfg.train.subtask_count,
            ErrorCode::ConfigError, "need one example set per sub-task");
    for (int i = 0; i < cfg.train.subtask_count; ++i) {
      const dist::JointGaussianParams joint = dist::fit_joint_gaussian(sets[i], fit_rng);
      tasks.joints.emplace_back(joint, i, cfg.smoothing);
    }
    return tasks;
  }

  // Plain disco: hand goal or fits from example files.
  if (cfg.goal) {
    const int n = static_cast<int>(cfg.goal->mean.size());
    dist::GaussianParams params;
    params.mean = cfg.goal->mean;
    if (cfg.goal->precision_rows.empty()) {
      params.cov = math::Matrix::identity(n);
      params.precision = math::Matrix::identity(n);
    } else {
      params.precision = math::Matrix(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) params.precision(i, j) = cfg.goal->precision_rows[i][j];
      params.cov = math::inverse_psd(params.precision);
    }
    params.source_task = 0;
    tasks.goals.push_back({params, nullptr});
    return tasks;
  }

  const auto sets = load_subtask_sets(cfg);
  require(!sets.empty(), ErrorCode::ConfigError, "no example sets for the disco run");
  const dist::Encoder encoder =
      cfg.model == trainer::GoalModel::kLatent
          ? config::make_synthetic_encoder(cfg.encoder,
                                           flatworld::observation_dim(cfg.train.m_objects))
          : dist::Encoder{};
  int task_id = 0;
  for (const auto& set : sets) {
    trainer::DiscoGoal goal;
    if (cfg.model == trainer::GoalModel::kGaussian) {
      dist::GaussianParams params = dist::fit_gaussian_mle(set, fit_rng, cfg.smoothing);
      params.source_task = task_id;
      goal.omega = std::move(params);
    } else if (cfg.model == trainer::GoalModel::kGmm) {
      dist::GmmFitConfig fit;
      fit.components = cfg.gmm_components;
      fit.restarts = cfg.gmm_restarts;
      goal.omega = dist::fit_gmm_em(set, fit_rng, fit, cfg.smoothing);
    } else {
      std::vector<dist::GaussianPosterior> posteriors;
      posteriors.reserve(set.states.size());
      for (const auto& s : set.states) posteriors.push_back(encoder(s));
      goal.omega = dist::moment_match(posteriors);
      goal.encoder = encoder;
    }
    tasks.goals.push_back(std::move(goal));
    ++task_id;
  }
  return tasks;
}

trainer::RunMetrics train_in_memory(const config::RunConfig& cfg, std::uint64_t seed,
                                    trainer::TrainedState* trained) {
  cfg.validate();
  const ResolvedTasks tasks = resolve_tasks(cfg, seed);
  switch (cfg.variant) {
    case trainer::Variant::kDisco:
      return trainer::run_disco(cfg.train, cfg.sac, cfg.relabel_config(), tasks.goals,
                                seed, trained);
    case trainer::Variant::kConditionalDisco:
      return trainer::run_conditional_disco(cfg.train, cfg.sac, cfg.relabel_config(),
                                            tasks.joints, seed, trained);
    case trainer::Variant::kHer:
      return trainer::run_her(cfg.train, cfg.sac, cfg.relabel_config(), seed, trained);
  }
  throw Error(ErrorCode::ConfigError, "unhandled variant");
}

namespace {

json summary_json(const config::RunConfig& cfg, std::uint64_t seed,
                  const trainer::RunMetrics& metrics) {
  json doc;
  doc["config_hash"] = config::config_hash(cfg);
  doc["variant"] = trainer::variant_name(cfg.variant);
  doc["seed"] = seed;
  doc["episodes"] = cfg.train.episodes;
  doc["env_steps"] = static_cast<long>(cfg.train.episodes) * cfg.train.horizon;
  json final = json::object();
  for (const auto& row : metrics.rows) final[row.metric] = row.mean;  // last wins
  doc["final"] = std::move(final);
  doc["config"] = json::parse(config::canonical_json(cfg));
  return doc;
}

}  // namespace

RunOutputs train_one(const config::RunConfig& cfg, std::uint64_t seed) {
  RunOutputs outputs;
  trainer::TrainedState trained;
  outputs.metrics = train_in_memory(cfg, seed, &trained);

  outputs.run_dir = (fs::path(cfg.out_dir) / ("seed" + std::to_string(seed))).string();
  fs::create_directories(outputs.run_dir);
  const std::string hash = config::config_hash(cfg);

  outputs.metrics_path = (fs::path(outputs.run_dir) / "metrics.csv").string();
  write_file(outputs.metrics_path, outputs.metrics.to_csv(hash, seed));

  outputs.summary_path = (fs::path(outputs.run_dir) / "summary.json").string();
  write_file(outputs.summary_path, summary_json(cfg, seed, outputs.metrics).dump(2) + "\n");

  outputs.checkpoint_path = (fs::path(outputs.run_dir) / "checkpoint.bin").string();
  trainer::save_checkpoint(outputs.checkpoint_path, trained.agent, hash,
                           trained.rng_states);
  return outputs;
}

trainer::RunMetrics eval_run(const std::string& run_dir, std::uint64_t eval_seed,
                             int episodes, const std::string& out_csv) {
  const json summary = json::parse(read_file((fs::path(run_dir) / "summary.json").string()));
  const config::RunConfig cfg =
      config::parse_run_config(summary.at("config").dump(), config::desk_preset());
  const std::uint64_t train_seed = summary.at("seed").get<std::uint64_t>();

  std::string stored_hash;
  const sac::SacAgent agent = trainer::load_checkpoint(
      (fs::path(run_dir) / "checkpoint.bin").string(), &stored_hash);
  require(stored_hash == summary.at("config_hash").get<std::string>(),
          ErrorCode::ConfigError, "checkpoint/summary hash mismatch");

  // Distributions are refit exactly as the training run fitted them.
  const ResolvedTasks tasks = resolve_tasks(cfg, train_seed);
  trainer::RunMetrics metrics = trainer::evaluate_agent(
      agent, cfg.variant, cfg.train, tasks.goals, tasks.joints, eval_seed, episodes);

  if (!out_csv.empty()) write_file(out_csv, metrics.to_csv(stored_hash, eval_seed));
  return metrics;
}

std::vector<std::string> ablate(const config::RunConfig& cfg, std::uint64_t seed) {
  require(cfg.variant == trainer::Variant::kConditionalDisco, ErrorCode::ConfigError,
          "the relabeling ablation runs the conditional variant");
  cfg.validate();
  const ResolvedTasks tasks = resolve_tasks(cfg, seed);
  const auto results = trainer::relabel_ablation(cfg.train, cfg.sac,
                                                 cfg.relabel_config(), tasks.joints, seed);

  std::vector<std::string> paths;
  for (const auto& [arm, metrics] : results) {
    config::RunConfig arm_cfg = cfg;
    arm_cfg.mean_relabel = arm != "no-mean-relabel";
    arm_cfg.covariance_relabel = arm != "no-covariance-relabel";
    const std::string dir =
        (fs::path(cfg.out_dir) / arm / ("seed" + std::to_string(seed))).string();
    fs::create_directories(dir);
    const std::string path = (fs::path(dir) / "metrics.csv").string();
    write_file(path, metrics.to_csv(config::config_hash(arm_cfg), seed));
    write_file((fs::path(dir) / "summary.json").string(),
               summary_json(arm_cfg, seed, metrics).dump(2) + "\n");
    paths.push_back(path);
  }
  return paths;
}

void export_curves(const std::vector<std::string>& csv_paths,
                   const std::string& out_path) {
  require(!csv_paths.empty(), ErrorCode::InvalidArgument, "no input curves");

  std::string shared_hash;
  // (env_steps, metric) -> per-seed means.
  std::map<std::pair<long, std::string>, std::vector<double>> series;
  std::map<std::pair<long, std::string>, int> episodes;

  for (const auto& path : csv_paths) {
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (line.rfind("# config_hash=", 0) == 0) {
        const std::string hash = line.substr(14);
        if (shared_hash.empty()) shared_hash = hash;
        require(shared_hash == hash, ErrorCode::InvalidArgument,
                "aggregating curves from different configurations");
        continue;
      }
      if (line.rfind("episode,", 0) == 0) continue;  // header
      std::istringstream row(line);
      std::string episode_s, steps_s, metric, mean_s, std_s, seed_s;
      std::getline(row, episode_s, ',');
      std::getline(row, steps_s, ',');
      std::getline(row, metric, ',');
      std::getline(row, mean_s, ',');
      std::getline(row, std_s, ',');
      std::getline(row, seed_s, ',');
      const long steps = std::stol(steps_s);
      series[{steps, metric}].push_back(std::stod(mean_s));
      episodes[{steps, metric}] = std::stoi(episode_s);
    }
  }

  std::ostringstream out;
  if (!shared_hash.empty()) out << "# config_hash=" << shared_hash << "\n";
  out << "episode,env_steps,metric,mean,std,n_seeds\n";
  for (const auto& [key, values] : series) {
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    double acc = 0.0;
    for (double v : values) acc += (v - mean) * (v - mean);
    const double stddev = std::sqrt(acc / values.size());
    out << episodes[key] << ',' << key.first << ',' << key.second << ','
        << format_double(mean) << ',' << format_double(stddev) << ',' << values.size()
        << "\n";
  }
  write_file(out_path, out.str());
}

}  // namespace disco::runner
