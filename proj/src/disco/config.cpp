#include "disco/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace disco::config {

using nlohmann::json;

replay::RelabelConfig RunConfig::relabel_config() const {
  replay::RelabelConfig cfg;
  cfg.p_relabel = p_relabel;
  cfg.future_fraction = future_fraction;
  cfg.random_fraction = random_fraction;
  cfg.mean_relabel = mean_relabel;
  cfg.covariance_relabel = covariance_relabel;
  return cfg;
}

void RunConfig::validate() const {
  train.validate(variant);
  sac.validate();
  relabel_config().validate();
  require(!seeds.empty(), ErrorCode::ConfigError, "need at least one seed");
  require(smoothing.epsilon >= 0.0 && smoothing.kappa_max > 1.0, ErrorCode::ConfigError,
          "bad smoothing constants");
  if (variant == trainer::Variant::kDisco && model == trainer::GoalModel::kGaussian)
    require(goal.has_value() || !subtasks.files.empty() || subtasks.generate,
            ErrorCode::ConfigError, "disco runs need a goal or example sets");
  if (variant == trainer::Variant::kConditionalDisco)
    require(subtasks.generate || !subtasks.files.empty(), ErrorCode::ConfigError,
            "conditional runs need paired example sets");
  if (goal && !goal->precision_rows.empty()) {
    for (const auto& row : goal->precision_rows)
      require(row.size() == goal->mean.size(), ErrorCode::ConfigError,
              "goal precision rows must match the mean dimension");
    require(goal->precision_rows.size() == goal->mean.size(), ErrorCode::ConfigError,
            "goal precision must be square");
  }
}

RunConfig desk_preset() {
  RunConfig cfg;  // struct defaults are the desk scale
  return cfg;
}

RunConfig paper_preset() {
  RunConfig cfg;
  cfg.train.m_objects = 4;
  cfg.train.subtask_count = 4;
  cfg.train.buffer_capacity = 1000000;
  cfg.train.hidden = {400, 300};
  cfg.sac.batch_size = 2048;
  return cfg;
}

RunConfig preset_by_name(const std::string& name) {
  if (name.empty() || name == "desk-scale") return desk_preset();
  if (name == "paper-scale") return paper_preset();
  throw Error(ErrorCode::ConfigError, "unknown preset: " + name);
}

namespace {

void check_keys(const json& object, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, value] : object.items())
    require(allowed.contains(key), ErrorCode::ConfigError,
            "unknown key '" + key + "' in " + where);
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const RunConfig& base) {
  RunConfig cfg = base;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  require(doc.is_object(), ErrorCode::ConfigError, "config root must be an object");
  check_keys(doc,
             {"variant", "model", "env", "train", "sac", "relabel", "smoothing",
              "subtasks", "goal", "encoder", "gmm", "out_dir", "seeds"},
             "config root");

  if (doc.contains("variant"))
    cfg.variant = trainer::variant_from_name(doc["variant"].get<std::string>());
  if (doc.contains("model"))
    cfg.model = trainer::model_from_name(doc["model"].get<std::string>());

  if (doc.contains("env")) {
    const json& env = doc["env"];
    check_keys(env, {"m_objects"}, "env");
    if (env.contains("m_objects")) cfg.train.m_objects = env["m_objects"].get<int>();
  }

  if (doc.contains("train")) {
    const json& train = doc["train"];
    check_keys(train,
               {"episodes", "horizon", "updates_per_episode", "subtask_count",
                "prefill_episodes", "buffer_capacity", "hidden",
                "eval_every_episodes", "eval_episodes", "eval_latched"},
               "train");
    if (train.contains("episodes")) cfg.train.episodes = train["episodes"].get<int>();
    if (train.contains("horizon")) cfg.train.horizon = train["horizon"].get<int>();
    if (train.contains("updates_per_episode"))
      cfg.train.updates_per_episode = train["updates_per_episode"].get<int>();
    if (train.contains("subtask_count"))
      cfg.train.subtask_count = train["subtask_count"].get<int>();
    if (train.contains("prefill_episodes"))
      cfg.train.prefill_episodes = train["prefill_episodes"].get<int>();
    if (train.contains("buffer_capacity"))
      cfg.train.buffer_capacity = train["buffer_capacity"].get<std::size_t>();
    if (train.contains("hidden"))
      cfg.train.hidden = train["hidden"].get<std::vector<int>>();
    if (train.contains("eval_every_episodes"))
      cfg.train.eval.every_episodes = train["eval_every_episodes"].get<int>();
    if (train.contains("eval_episodes"))
      cfg.train.eval.episodes = train["eval_episodes"].get<int>();
    if (train.contains("eval_latched"))
      cfg.train.eval.latched = train["eval_latched"].get<bool>();
  }

  if (doc.contains("sac")) {
    const json& sac = doc["sac"];
    check_keys(sac,
               {"gamma", "tau", "lr_q", "lr_policy", "lr_alpha", "batch_size",
                "target_entropy", "initial_log_alpha"},
               "sac");
    if (sac.contains("gamma")) cfg.sac.gamma = sac["gamma"].get<double>();
    if (sac.contains("tau")) cfg.sac.tau = sac["tau"].get<double>();
    if (sac.contains("lr_q")) cfg.sac.lr_q = sac["lr_q"].get<double>();
    if (sac.contains("lr_policy")) cfg.sac.lr_policy = sac["lr_policy"].get<double>();
    if (sac.contains("lr_alpha")) cfg.sac.lr_alpha = sac["lr_alpha"].get<double>();
    if (sac.contains("batch_size")) cfg.sac.batch_size = sac["batch_size"].get<int>();
    if (sac.contains("target_entropy"))
      cfg.sac.target_entropy = sac["target_entropy"].get<double>();
    if (sac.contains("initial_log_alpha"))
      cfg.sac.initial_log_alpha = sac["initial_log_alpha"].get<double>();
  }

  if (doc.contains("relabel")) {
    const json& relabel = doc["relabel"];
    check_keys(relabel,
               {"p_relabel", "future_fraction", "random_fraction", "mean_relabel",
                "covariance_relabel"},
               "relabel");
    if (relabel.contains("p_relabel"))
      cfg.p_relabel = relabel["p_relabel"].get<double>();
    if (relabel.contains("future_fraction"))
      cfg.future_fraction = relabel["future_fraction"].get<double>();
    if (relabel.contains("random_fraction"))
      cfg.random_fraction = relabel["random_fraction"].get<double>();
    if (relabel.contains("mean_relabel"))
      cfg.mean_relabel = relabel["mean_relabel"].get<bool>();
    if (relabel.contains("covariance_relabel"))
      cfg.covariance_relabel = relabel["covariance_relabel"].get<bool>();
  }

  if (doc.contains("smoothing")) {
    const json& smoothing = doc["smoothing"];
    check_keys(smoothing, {"epsilon", "kappa_max"}, "smoothing");
    if (smoothing.contains("epsilon"))
      cfg.smoothing.epsilon = smoothing["epsilon"].get<double>();
    if (smoothing.contains("kappa_max"))
      cfg.smoothing.kappa_max = smoothing["kappa_max"].get<double>();
  }

  if (doc.contains("subtasks")) {
    const json& subtasks = doc["subtasks"];
    check_keys(subtasks, {"files", "generate", "k", "noise_std", "seed"}, "subtasks");
    if (subtasks.contains("files"))
      cfg.subtasks.files = subtasks["files"].get<std::vector<std::string>>();
    if (subtasks.contains("generate"))
      cfg.subtasks.generate = subtasks["generate"].get<bool>();
    if (subtasks.contains("k")) cfg.subtasks.k = subtasks["k"].get<int>();
    if (subtasks.contains("noise_std"))
      cfg.subtasks.noise_std = subtasks["noise_std"].get<double>();
    if (subtasks.contains("seed"))
      cfg.subtasks.seed = subtasks["seed"].get<std::uint64_t>();
  }

  if (doc.contains("goal")) {
    const json& goal = doc["goal"];
    check_keys(goal, {"mean", "precision"}, "goal");
    HandGoal hand;
    hand.mean = goal.at("mean").get<std::vector<double>>();
    if (goal.contains("precision") && !goal["precision"].is_string())
      hand.precision_rows =
          goal["precision"].get<std::vector<std::vector<double>>>();
    else if (goal.contains("precision"))
      require(goal["precision"].get<std::string>() == "identity",
              ErrorCode::ConfigError, "goal precision must be rows or \"identity\"");
    cfg.goal = std::move(hand);
  }

  if (doc.contains("encoder")) {
    const json& encoder = doc["encoder"];
    check_keys(encoder, {"latent_dim", "seed"}, "encoder");
    if (encoder.contains("latent_dim"))
      cfg.encoder.latent_dim = encoder["latent_dim"].get<int>();
    if (encoder.contains("seed"))
      cfg.encoder.seed = encoder["seed"].get<std::uint64_t>();
  }

  if (doc.contains("gmm")) {
    const json& gmm = doc["gmm"];
    check_keys(gmm, {"components", "restarts"}, "gmm");
    if (gmm.contains("components")) cfg.gmm_components = gmm["components"].get<int>();
    if (gmm.contains("restarts")) cfg.gmm_restarts = gmm["restarts"].get<int>();
  }

  if (doc.contains("out_dir")) cfg.out_dir = doc["out_dir"].get<std::string>();
  if (doc.contains("seeds"))
    cfg.seeds = doc["seeds"].get<std::vector<std::uint64_t>>();

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path, const std::string& preset) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open config: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), preset_by_name(preset));
}

std::string canonical_json(const RunConfig& cfg) {
  json doc;
  doc["variant"] = trainer::variant_name(cfg.variant);
  doc["model"] = trainer::model_name(cfg.model);
  doc["env"]["m_objects"] = cfg.train.m_objects;
  doc["train"]["episodes"] = cfg.train.episodes;
  doc["train"]["horizon"] = cfg.train.horizon;
  doc["train"]["updates_per_episode"] = cfg.train.updates_per_episode;
  doc["train"]["subtask_count"] = cfg.train.subtask_count;
  doc["train"]["prefill_episodes"] = cfg.train.prefill_episodes;
  doc["train"]["buffer_capacity"] = cfg.train.buffer_capacity;
  doc["train"]["hidden"] = cfg.train.hidden;
  doc["train"]["eval_every_episodes"] = cfg.train.eval.every_episodes;
  doc["train"]["eval_episodes"] = cfg.train.eval.episodes;
  doc["train"]["eval_latched"] = cfg.train.eval.latched;
  doc["sac"]["gamma"] = cfg.sac.gamma;
  doc["sac"]["tau"] = cfg.sac.tau;
  doc["sac"]["lr_q"] = cfg.sac.lr_q;
  doc["sac"]["lr_policy"] = cfg.sac.lr_policy;
  doc["sac"]["lr_alpha"] = cfg.sac.lr_alpha;
  doc["sac"]["batch_size"] = cfg.sac.batch_size;
  if (!std::isnan(cfg.sac.target_entropy))
    doc["sac"]["target_entropy"] = cfg.sac.target_entropy;
  doc["sac"]["initial_log_alpha"] = cfg.sac.initial_log_alpha;
  doc["relabel"]["p_relabel"] = cfg.p_relabel;
  doc["relabel"]["future_fraction"] = cfg.future_fraction;
  doc["relabel"]["random_fraction"] = cfg.random_fraction;
  doc["relabel"]["mean_relabel"] = cfg.mean_relabel;
  doc["relabel"]["covariance_relabel"] = cfg.covariance_relabel;
  doc["smoothing"]["epsilon"] = cfg.smoothing.epsilon;
  doc["smoothing"]["kappa_max"] = cfg.smoothing.kappa_max;
  doc["subtasks"]["files"] = cfg.subtasks.files;
  doc["subtasks"]["generate"] = cfg.subtasks.generate;
  doc["subtasks"]["k"] = cfg.subtasks.k;
  doc["subtasks"]["noise_std"] = cfg.subtasks.noise_std;
  doc["subtasks"]["seed"] = cfg.subtasks.seed;
  if (cfg.goal) {
    doc["goal"]["mean"] = cfg.goal->mean;
    if (cfg.goal->precision_rows.empty())
      doc["goal"]["precision"] = "identity";
    else
      doc["goal"]["precision"] = cfg.goal->precision_rows;
  }
  doc["encoder"]["latent_dim"] = cfg.encoder.latent_dim;
  doc["encoder"]["seed"] = cfg.encoder.seed;
  doc["gmm"]["components"] = cfg.gmm_components;
  doc["gmm"]["restarts"] = cfg.gmm_restarts;
  doc["out_dir"] = cfg.out_dir;
  doc["seeds"] = cfg.seeds;
  return doc.dump(2);
}

std::string config_hash(const RunConfig& cfg) {
  json doc = json::parse(canonical_json(cfg));
  doc.erase("seeds");
  doc.erase("out_dir");
  char buffer[20];
  std::snprintf(buffer, sizeof(buffer), "%016llx",
                static_cast<unsigned long long>(fnv1a64(doc.dump())));
  return buffer;
}

dist::Encoder make_synthetic_encoder(const EncoderConfig& encoder, int state_dim) {
  Rng rng(splitmix64(encoder.seed ^ 0x656e636f64657221ULL));
  const int d_z = encoder.latent_dim;
  std::vector<std::vector<double>> weight(d_z, std::vector<double>(state_dim));
  std::vector<double> bias(d_z);
  std::vector<double> variance(d_z);
  const double scale = 1.0 / std::sqrt(static_cast<double>(state_dim));
  for (int i = 0; i < d_z; ++i) {
    for (int j = 0; j < state_dim; ++j) weight[i][j] = rng.uniform(-scale, scale);
    bias[i] = rng.uniform(-1.0, 1.0);
    variance[i] = rng.uniform(0.05, 0.5);
  }
  return [weight, bias, variance, d_z](std::span<const double> s) {
    dist::GaussianPosterior post;
    post.mean.resize(d_z);
    post.var = variance;
    for (int i = 0; i < d_z; ++i) {
      double acc = bias[i];
      for (std::size_t j = 0; j < s.size(); ++j) acc += weight[i][j] * s[j];
      post.mean[i] = acc;
    }
    return post;
  };
}

}  // namespace disco::config
