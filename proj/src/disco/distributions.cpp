#include "disco/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace disco::dist {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_dim(int got, int want, const char* what) {
  require(got == want, ErrorCode::DimensionMismatch, what);
}

std::vector<std::vector<double>> noised_states(
    const std::vector<std::vector<double>>& states, double noise_std, Rng& rng) {
  std::vector<std::vector<double>> out = states;
  if (noise_std > 0.0) {
    for (auto& s : out)
      for (double& v : s) v += noise_std * rng.normal();
  }
  return out;
}

std::vector<double> sample_mean(const std::vector<std::vector<double>>& states) {
  const int n = static_cast<int>(states.front().size());
  std::vector<double> mean(n, 0.0);
  for (const auto& s : states)
    for (int i = 0; i < n; ++i) mean[i] += s[i];
  for (double& v : mean) v /= static_cast<double>(states.size());
  return mean;
}

// 1/K-normalized covariance (the MLE form, not the unbiased estimator).
Matrix mle_covariance(const std::vector<std::vector<double>>& states,
                      std::span<const double> mean) {
  const int n = static_cast<int>(mean.size());
  Matrix cov(n, n);
  for (const auto& s : states) {
    for (int i = 0; i < n; ++i) {
      const double di = s[i] - mean[i];
      for (int j = i; j < n; ++j) cov(i, j) += di * (s[j] - mean[j]);
    }
  }
  const double inv_k = 1.0 / static_cast<double>(states.size());
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      cov(i, j) *= inv_k;
      cov(j, i) = cov(i, j);
    }
  return cov;
}

double log_sum_exp(std::span<const double> values) {
  double max_v = -std::numeric_limits<double>::infinity();
  for (double v : values) max_v = std::max(max_v, v);
  if (!std::isfinite(max_v)) return max_v;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - max_v);
  return max_v + std::log(sum);
}

}  // namespace

SmoothedPrecision smooth_precision_checked(const Matrix& cov,
                                           const SmoothingConfig& cfg) {
  const Matrix capped = math::cap_condition(cov, cfg.kappa_max);
  Matrix precision = math::symmetrized(math::inverse_psd(capped));

  const double max_abs = precision.max_abs();
  // A capped PSD matrix is invertible with a positive diagonal, so the
  // inverse cannot be all-zero.
  for (double& v : precision.data()) v /= max_abs;
  for (double& v : precision.data())
    if (std::abs(v) < cfg.epsilon) v = 0.0;

  bool psd = true;
  const auto eig = math::sym_eigen(precision);
  for (double lambda : eig.values)
    if (lambda < -1e-10) psd = false;
  return {std::move(precision), psd};
}

Matrix smooth_precision(const Matrix& cov, const SmoothingConfig& cfg) {
  return smooth_precision_checked(cov, cfg).precision;
}

double gaussian_reward(std::span<const double> s, const GaussianParams& omega) {
  check_dim(static_cast<int>(s.size()), omega.dim(), "state/omega dimensions differ");
  const int n = omega.dim();
  double quad = 0.0;
  for (int i = 0; i < n; ++i) {
    const double di = s[i] - omega.mean[i];
    double row = 0.0;
    for (int j = 0; j < n; ++j) row += omega.precision(i, j) * (s[j] - omega.mean[j]);
    quad += di * row;
  }
  return -0.5 * quad;
}

std::vector<double> gaussian_reward_gradient(std::span<const double> s,
                                             const GaussianParams& omega) {
  check_dim(static_cast<int>(s.size()), omega.dim(), "state/omega dimensions differ");
  const std::vector<double> delta = math::sub(s, omega.mean);
  std::vector<double> grad = omega.precision * delta;
  for (double& v : grad) v = -v;
  return grad;
}

double log_gaussian_pdf(std::span<const double> s, std::span<const double> mean,
                        const Matrix& cov) {
  check_dim(static_cast<int>(s.size()), static_cast<int>(mean.size()),
            "state/mean dimensions differ");
  const int n = static_cast<int>(mean.size());
  const Matrix lower = math::cholesky(cov);
  const std::vector<double> delta = math::sub(s, mean);
  const std::vector<double> solved = math::cholesky_solve(lower, delta);
  double log_det = 0.0;
  for (int i = 0; i < n; ++i) log_det += std::log(lower(i, i));
  return -0.5 * (n * kLog2Pi + math::dot(delta, solved)) - log_det;
}

GaussianParams fit_gaussian_mle(const ExampleSet& examples, Rng& rng,
                                const SmoothingConfig& cfg) {
  require(examples.size() >= 2, ErrorCode::TooFewExamples,
          "Gaussian MLE needs at least 2 examples");
  const auto noised = noised_states(examples.states, examples.noise_std, rng);
  GaussianParams params;
  params.mean = sample_mean(noised);
  params.cov = mle_covariance(noised, params.mean);
  auto smoothed = smooth_precision_checked(params.cov, cfg);
  params.precision = std::move(smoothed.precision);
  params.precision_psd = smoothed.psd;
  return params;
}

namespace {

struct EmState {
  std::vector<double> weights;
  std::vector<std::vector<double>> means;
  std::vector<Matrix> covs;
};

// k-means++ style seeding: first center uniform, later ones proportional to
// squared distance from the closest chosen center.
EmState seed_em(const std::vector<std::vector<double>>& data, int k, Rng& rng,
                const Matrix& global_cov) {
  EmState state;
  state.weights.assign(k, 1.0 / k);
  state.covs.assign(k, global_cov);
  state.means.push_back(data[rng.index(data.size())]);
  std::vector<double> dist2(data.size(), 0.0);
  while (static_cast<int>(state.means.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : state.means)
        best = std::min(best, math::squared_norm(math::sub(data[i], c)));
      dist2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      state.means.push_back(data[rng.index(data.size())]);
      continue;
    }
    double pick = rng.uniform() * total;
    std::size_t chosen = data.size() - 1;
    for (std::size_t i = 0; i < data.size(); ++i) {
      pick -= dist2[i];
      if (pick <= 0.0) {
        chosen = i;
        break;
      }
    }
    state.means.push_back(data[chosen]);
  }
  return state;
}

// Lift the smallest eigenvalue to at least `floor`. A no-op on healthy
// covariances, which keeps single-component EM bit-for-bit equal to the
// plain MLE fit.
Matrix floored(const Matrix& cov, double floor) {
  const auto eig = math::sym_eigen(cov);
  const double lambda_min = eig.values.back();
  if (lambda_min >= floor) return cov;
  Matrix out = cov;
  for (int i = 0; i < out.rows(); ++i) out(i, i) += floor - lambda_min;
  return out;
}

}  // namespace

GmmFitTrace fit_gmm_em_traced(const ExampleSet& examples, Rng& rng,
                              const GmmFitConfig& fit, const SmoothingConfig& cfg) {
  require(fit.components >= 1, ErrorCode::InvalidArgument, "need at least 1 component");
  require(examples.size() >= fit.components, ErrorCode::TooFewExamples,
          "EM needs at least as many examples as components");

  const auto data = noised_states(examples.states, examples.noise_std, rng);
  const int k = fit.components;
  const int n = static_cast<int>(data.front().size());
  const int count = static_cast<int>(data.size());

  const std::vector<double> global_mean = sample_mean(data);
  const Matrix global_cov = floored(mle_covariance(data, global_mean), fit.covariance_floor);

  GmmFitTrace best;
  double best_ll = -std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < fit.restarts; ++restart) {
    EmState state = seed_em(data, k, rng, global_cov);
    std::vector<double> ll_history;
    std::vector<int> reseeds;

    std::vector<std::vector<double>> log_resp(count, std::vector<double>(k));
    double prev_ll = -std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < fit.max_iters; ++iter) {
      // E-step.
      double ll = 0.0;
      for (int i = 0; i < count; ++i) {
        for (int j = 0; j < k; ++j)
          log_resp[i][j] = std::log(state.weights[j]) +
                           log_gaussian_pdf(data[i], state.means[j], state.covs[j]);
        const double norm = log_sum_exp(log_resp[i]);
        ll += norm;
        for (int j = 0; j < k; ++j) log_resp[i][j] -= norm;
      }
      ll_history.push_back(ll);

      // M-step.
      bool reseeded = false;
      for (int j = 0; j < k; ++j) {
        double resp_sum = 0.0;
        std::vector<double> mean(n, 0.0);
        for (int i = 0; i < count; ++i) {
          const double r = std::exp(log_resp[i][j]);
          resp_sum += r;
          for (int d = 0; d < n; ++d) mean[d] += r * data[i][d];
        }
        const double weight = resp_sum / count;
        if (weight < fit.weight_floor) {
          // Collapsed component: restart it at a random data point.
          state.means[j] = data[rng.index(data.size())];
          state.covs[j] = global_cov;
          state.weights[j] = 1.0 / count;
          reseeded = true;
          continue;
        }
        for (double& v : mean) v /= resp_sum;
        Matrix cov(n, n);
        for (int i = 0; i < count; ++i) {
          const double r = std::exp(log_resp[i][j]);
          for (int a = 0; a < n; ++a) {
            const double da = data[i][a] - mean[a];
            for (int b = a; b < n; ++b) cov(a, b) += r * da * (data[i][b] - mean[b]);
          }
        }
        for (int a = 0; a < n; ++a)
          for (int b = a; b < n; ++b) {
            cov(a, b) /= resp_sum;
            cov(b, a) = cov(a, b);
          }
        state.means[j] = std::move(mean);
        state.covs[j] = floored(cov, fit.covariance_floor);
        state.weights[j] = weight;
      }
      // Renormalize weights (exact simplex even after re-seeding).
      double wsum = 0.0;
      for (double w : state.weights) wsum += w;
      for (double& w : state.weights) w /= wsum;

      if (reseeded) {
        reseeds.push_back(iter);
        prev_ll = -std::numeric_limits<double>::infinity();
        continue;
      }
      if (ll - prev_ll < fit.tol && iter > 0) break;
      prev_ll = ll;
    }

    if (!ll_history.empty() && ll_history.back() > best_ll) {
      best_ll = ll_history.back();
      GmmParams params;
      params.weights = state.weights;
      for (int j = 0; j < k; ++j) {
        GaussianParams comp;
        comp.mean = state.means[j];
        comp.cov = state.covs[j];
        auto smoothed = smooth_precision_checked(comp.cov, cfg);
        comp.precision = std::move(smoothed.precision);
        comp.precision_psd = smoothed.psd;
        params.components.push_back(std::move(comp));
      }
      best.params = std::move(params);
      best.log_likelihood = std::move(ll_history);
      best.reseed_iterations = std::move(reseeds);
    }
  }
  return best;
}

GmmParams fit_gmm_em(const ExampleSet& examples, Rng& rng, const GmmFitConfig& fit,
                     const SmoothingConfig& cfg) {
  return fit_gmm_em_traced(examples, rng, fit, cfg).params;
}

double gmm_reward(std::span<const double> s, const GmmParams& omega) {
  require(!omega.components.empty(), ErrorCode::EmptySet, "mixture has no components");
  check_dim(static_cast<int>(s.size()), omega.dim(), "state/mixture dimensions differ");
  std::vector<double> terms(omega.components.size());
  for (std::size_t j = 0; j < omega.components.size(); ++j)
    terms[j] = std::log(omega.weights[j]) +
               log_gaussian_pdf(s, omega.components[j].mean, omega.components[j].cov);
  return log_sum_exp(terms);
}

LatentGaussianParams moment_match(const std::vector<GaussianPosterior>& posteriors) {
  require(!posteriors.empty(), ErrorCode::EmptySet, "no posteriors to match");
  const int d = static_cast<int>(posteriors.front().mean.size());
  for (const auto& p : posteriors) {
    check_dim(static_cast<int>(p.mean.size()), d, "posterior dimensions differ");
    check_dim(static_cast<int>(p.var.size()), d, "posterior var dimensions differ");
  }
  const double inv_k = 1.0 / static_cast<double>(posteriors.size());
  LatentGaussianParams out;
  out.mean_z.assign(d, 0.0);
  out.var_z.assign(d, 0.0);
  for (const auto& p : posteriors)
    for (int i = 0; i < d; ++i) {
      out.mean_z[i] += inv_k * p.mean[i];
      out.var_z[i] += inv_k * (p.var[i] + p.mean[i] * p.mean[i]);
    }
  for (int i = 0; i < d; ++i)
    out.var_z[i] = std::max(out.var_z[i] - out.mean_z[i] * out.mean_z[i], 1e-8);
  return out;
}

double latent_reward(std::span<const double> s, const LatentGaussianParams& omega,
                     const Encoder& encoder) {
  const GaussianPosterior posterior = encoder(s);
  check_dim(static_cast<int>(posterior.mean.size()), omega.dim(),
            "encoder output does not match latent dimension");
  double value = 0.0;
  for (int i = 0; i < omega.dim(); ++i) {
    const double delta = posterior.mean[i] - omega.mean_z[i];
    value += -0.5 * (kLog2Pi + std::log(omega.var_z[i])) -
             0.5 * delta * delta / omega.var_z[i];
  }
  return value;
}

std::vector<double> JointGaussianParams::mean_first() const {
  return {mean.begin(), mean.begin() + half_dim};
}

std::vector<double> JointGaussianParams::mean_second() const {
  return {mean.begin() + half_dim, mean.end()};
}

Matrix JointGaussianParams::block(int row_block, int col_block) const {
  Matrix out(half_dim, half_dim);
  const int r0 = row_block * half_dim;
  const int c0 = col_block * half_dim;
  for (int i = 0; i < half_dim; ++i)
    for (int j = 0; j < half_dim; ++j) out(i, j) = cov(r0 + i, c0 + j);
  return out;
}

JointGaussianParams fit_joint_gaussian(const ExampleSet& pairs, Rng& rng) {
  require(pairs.paired(), ErrorCode::UnpairedExamples,
          "joint fit needs paired final states");
  require(pairs.final_states.size() == pairs.states.size(), ErrorCode::UnpairedExamples,
          "state/final lists have different lengths");
  require(pairs.size() >= 2, ErrorCode::TooFewExamples,
          "joint MLE needs at least 2 pairs");
  const int n = pairs.dim();
  for (const auto& f : pairs.final_states)
    check_dim(static_cast<int>(f.size()), n, "final-state dimension differs");

  std::vector<std::vector<double>> stacked(pairs.size());
  for (int i = 0; i < pairs.size(); ++i) {
    stacked[i].reserve(2 * n);
    stacked[i].insert(stacked[i].end(), pairs.states[i].begin(), pairs.states[i].end());
    stacked[i].insert(stacked[i].end(), pairs.final_states[i].begin(),
                      pairs.final_states[i].end());
  }
  const auto noised = noised_states(stacked, pairs.noise_std, rng);

  JointGaussianParams joint;
  joint.half_dim = n;
  joint.mean = sample_mean(noised);
  joint.cov = mle_covariance(noised, joint.mean);
  return joint;
}

GaussianParams condition_gaussian(const JointGaussianParams& joint,
                                  std::span<const double> s_f,
                                  const SmoothingConfig& cfg) {
  SubtaskConditioner conditioner(joint, -1, cfg);
  return conditioner.condition(s_f);
}

SubtaskConditioner::SubtaskConditioner(const JointGaussianParams& joint,
                                       int source_task, const SmoothingConfig& cfg)
    : mu1_(joint.mean_first()), mu2_(joint.mean_second()) {
  const Matrix s11 = joint.block(0, 0);
  const Matrix s12 = joint.block(0, 1);
  const Matrix s21 = joint.block(1, 0);
  const Matrix s22 = math::cap_condition(joint.block(1, 1), cfg.kappa_max);

  // gain = S12 S22^-1, computed as (S22^-1 S21)^T through one factorization.
  gain_ = math::solve_psd_matrix(s22, s21).transposed();

  base_.cov = math::symmetrized(s11 - gain_ * s21);
  auto smoothed = smooth_precision_checked(base_.cov, cfg);
  base_.precision = std::move(smoothed.precision);
  base_.precision_psd = smoothed.psd;
  base_.source_task = source_task;
}

std::vector<double> SubtaskConditioner::conditional_mean(
    std::span<const double> s_f) const {
  check_dim(static_cast<int>(s_f.size()), static_cast<int>(mu2_.size()),
            "s_f dimension does not match the joint");
  const std::vector<double> innovation = math::sub(s_f, mu2_);
  return math::add(mu1_, gain_ * innovation);
}

GaussianParams SubtaskConditioner::condition(std::span<const double> s_f) const {
  GaussianParams out = base_;
  out.mean = conditional_mean(s_f);
  return out;
}

// --- serialization -------------------------------------------------------

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows) {
  require(rows.is_array() && !rows.empty(), ErrorCode::IoError, "bad matrix field");
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j].get<double>();
  return m;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::IoError, "cannot write " + path);
  out << text;
}

}  // namespace

std::string example_set_to_json(const ExampleSet& set, std::uint64_t seed,
                                const std::string& config_hash) {
  json doc;
  doc["dim"] = set.dim();
  doc["noise_std"] = set.noise_std;
  doc["seed"] = seed;
  if (!config_hash.empty()) doc["config_hash"] = config_hash;
  doc["paired"] = set.paired();
  json examples = json::array();
  for (int i = 0; i < set.size(); ++i) {
    json record;
    record["state"] = set.states[i];
    if (set.paired()) record["final_state"] = set.final_states[i];
    examples.push_back(std::move(record));
  }
  doc["examples"] = std::move(examples);
  return doc.dump(2) + "\n";
}

ExampleSet example_set_from_json(const std::string& text) {
  const json doc = json::parse(text);
  ExampleSet set;
  set.noise_std = doc.at("noise_std").get<double>();
  const bool paired = doc.at("paired").get<bool>();
  for (const auto& record : doc.at("examples")) {
    set.states.push_back(record.at("state").get<std::vector<double>>());
    if (paired)
      set.final_states.push_back(record.at("final_state").get<std::vector<double>>());
  }
  const int dim = doc.at("dim").get<int>();
  for (const auto& s : set.states)
    check_dim(static_cast<int>(s.size()), dim, "example dimension differs from header");
  return set;
}

void save_example_set(const std::string& path, const ExampleSet& set,
                      std::uint64_t seed, const std::string& config_hash) {
  write_file(path, example_set_to_json(set, seed, config_hash));
}

ExampleSet load_example_set(const std::string& path) {
  return example_set_from_json(read_file(path));
}

std::string gaussian_params_to_json(const GaussianParams& params,
                                    const SmoothingConfig& cfg,
                                    const std::string& config_hash) {
  json doc;
  doc["model"] = "gaussian";
  if (!config_hash.empty()) doc["config_hash"] = config_hash;
  doc["mean"] = params.mean;
  doc["cov"] = matrix_to_json(params.cov);
  doc["precision"] = matrix_to_json(params.precision);
  doc["precision_psd"] = params.precision_psd;
  doc["epsilon"] = cfg.epsilon;
  doc["kappa_max"] = cfg.kappa_max;
  return doc.dump(2) + "\n";
}

GaussianParams gaussian_params_from_json(const std::string& text) {
  const json doc = json::parse(text);
  GaussianParams params;
  params.mean = doc.at("mean").get<std::vector<double>>();
  params.cov = matrix_from_json(doc.at("cov"));
  params.precision = matrix_from_json(doc.at("precision"));
  params.precision_psd = doc.value("precision_psd", true);
  return params;
}

void save_gaussian_params(const std::string& path, const GaussianParams& params,
                          const SmoothingConfig& cfg,
                          const std::string& config_hash) {
  write_file(path, gaussian_params_to_json(params, cfg, config_hash));
}

GaussianParams load_gaussian_params(const std::string& path) {
  return gaussian_params_from_json(read_file(path));
}

std::string joint_params_to_json(const JointGaussianParams& params,
                                 const std::string& config_hash) {
  json doc;
  doc["model"] = "joint_gaussian";
  if (!config_hash.empty()) doc["config_hash"] = config_hash;
  doc["half_dim"] = params.half_dim;
  doc["mean"] = params.mean;
  doc["cov"] = matrix_to_json(params.cov);
  return doc.dump(2) + "\n";
}

JointGaussianParams joint_params_from_json(const std::string& text) {
  const json doc = json::parse(text);
  JointGaussianParams params;
  params.half_dim = doc.at("half_dim").get<int>();
  params.mean = doc.at("mean").get<std::vector<double>>();
  params.cov = matrix_from_json(doc.at("cov"));
  return params;
}

std::string gmm_params_to_json(const GmmParams& params, const SmoothingConfig& cfg,
                               const std::string& config_hash) {
  json doc;
  doc["model"] = "gmm";
  if (!config_hash.empty()) doc["config_hash"] = config_hash;
  doc["weights"] = params.weights;
  doc["epsilon"] = cfg.epsilon;
  doc["kappa_max"] = cfg.kappa_max;
  json comps = json::array();
  for (const auto& c : params.components) {
    json comp;
    comp["mean"] = c.mean;
    comp["cov"] = matrix_to_json(c.cov);
    comp["precision"] = matrix_to_json(c.precision);
    comp["precision_psd"] = c.precision_psd;
    comps.push_back(std::move(comp));
  }
  doc["components"] = std::move(comps);
  return doc.dump(2) + "\n";
}

GmmParams gmm_params_from_json(const std::string& text) {
  const json doc = json::parse(text);
  GmmParams params;
  params.weights = doc.at("weights").get<std::vector<double>>();
  for (const auto& comp : doc.at("components")) {
    GaussianParams c;
    c.mean = comp.at("mean").get<std::vector<double>>();
    c.cov = matrix_from_json(comp.at("cov"));
    c.precision = matrix_from_json(comp.at("precision"));
    c.precision_psd = comp.value("precision_psd", true);
    params.components.push_back(std::move(c));
  }
  return params;
}

std::string latent_params_to_json(const LatentGaussianParams& params,
                                  const std::string& config_hash) {
  json doc;
  doc["model"] = "latent_gaussian";
  if (!config_hash.empty()) doc["config_hash"] = config_hash;
  doc["mean_z"] = params.mean_z;
  doc["var_z"] = params.var_z;
  return doc.dump(2) + "\n";
}

LatentGaussianParams latent_params_from_json(const std::string& text) {
  const json doc = json::parse(text);
  LatentGaussianParams params;
  params.mean_z = doc.at("mean_z").get<std::vector<double>>();
  params.var_z = doc.at("var_z").get<std::vector<double>>();
  return params;
}

}  // namespace disco::dist
