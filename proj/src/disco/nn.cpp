#include "disco/nn.hpp"

#include <cmath>
#include <istream>
#include <ostream>

namespace disco::nn {

std::size_t Mlp::parameter_count() const {
  std::size_t count = 0;
  for (int l = 0; l < layer_count(); ++l)
    count += weights[l].size() + biases[l].size();
  return count;
}

Mlp make_mlp(const std::vector<int>& dims, Rng& rng, double final_scale) {
  require(dims.size() >= 2, ErrorCode::InvalidArgument, "need input and output dims");
  Mlp net;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    const bool last = l + 2 == dims.size();
    const double bound = last ? final_scale : 1.0 / std::sqrt(static_cast<double>(in));
    MatrixXd w(in, out);
    for (int i = 0; i < in; ++i)
      for (int j = 0; j < out; ++j) w(i, j) = rng.uniform(-bound, bound);
    VectorXd b = VectorXd::Zero(out);
    if (last)
      for (int j = 0; j < out; ++j) b(j) = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

MatrixXd forward_batch(const Mlp& net, const MatrixXd& x, MlpCache* cache) {
  require(x.cols() == net.input_dim(), ErrorCode::DimensionMismatch,
          "input width does not match the first layer");
  const int layers = net.layer_count();
  if (!cache) {
    MatrixXd h = x;
    MatrixXd z;
    for (int l = 0; l < layers; ++l) {
      z.noalias() = h * net.weights[l];
      z.rowwise() += net.biases[l].transpose();
      if (l + 1 < layers)
        h = z.cwiseMax(0.0);  // ReLU hidden activations
      else
        h = std::move(z);  // identity output
    }
    return h;
  }

  cache->net = &net;
  cache->version = net.version;
  cache->inputs.resize(layers);
  cache->pre.resize(layers > 0 ? layers - 1 : 0);
  cache->inputs[0] = x;
  for (int l = 0; l + 1 < layers; ++l) {
    MatrixXd& z = cache->pre[l];
    z.noalias() = cache->inputs[l] * net.weights[l];
    z.rowwise() += net.biases[l].transpose();
    cache->inputs[l + 1] = z.cwiseMax(0.0);
  }
  MatrixXd out;
  out.noalias() = cache->inputs[layers - 1] * net.weights[layers - 1];
  out.rowwise() += net.biases[layers - 1].transpose();
  return out;
}

namespace {

void check_cache(const MlpCache& cache) {
  require(cache.net != nullptr, ErrorCode::StaleCache, "cache has no source net");
  require(cache.version == cache.net->version, ErrorCode::StaleCache,
          "parameters changed since the forward pass");
}

}  // namespace

MlpGrads backward_batch(const MlpCache& cache, const MatrixXd& output_grad,
                        MatrixXd* input_grad) {
  check_cache(cache);
  const Mlp& net = *cache.net;
  require(output_grad.cols() == net.output_dim() &&
              output_grad.rows() == cache.inputs.front().rows(),
          ErrorCode::ShapeMismatch, "output_grad shape mismatch");

  MlpGrads grads;
  grads.weights.resize(net.layer_count());
  grads.biases.resize(net.layer_count());

  MatrixXd delta = output_grad;
  MatrixXd next;
  for (int l = net.layer_count() - 1; l >= 0; --l) {
    if (l + 1 < net.layer_count())
      delta.array() *= (cache.pre[l].array() > 0.0).cast<double>();
    grads.weights[l].noalias() = cache.inputs[l].transpose() * delta;
    grads.biases[l] = delta.colwise().sum().transpose();
    if (l > 0 || input_grad != nullptr) {
      next.noalias() = delta * net.weights[l].transpose();
      delta.swap(next);
    }
  }
  if (input_grad) *input_grad = std::move(delta);
  return grads;
}

MatrixXd backward_input_only(const MlpCache& cache, const MatrixXd& output_grad) {
  check_cache(cache);
  const Mlp& net = *cache.net;
  MatrixXd delta = output_grad;
  MatrixXd next;
  for (int l = net.layer_count() - 1; l >= 0; --l) {
    if (l + 1 < net.layer_count())
      delta.array() *= (cache.pre[l].array() > 0.0).cast<double>();
    next.noalias() = delta * net.weights[l].transpose();
    delta.swap(next);
  }
  return delta;
}

std::vector<double> mlp_forward(const Mlp& net, std::span<const double> input) {
  MatrixXd x(1, input.size());
  for (std::size_t i = 0; i < input.size(); ++i) x(0, i) = input[i];
  const MatrixXd y = forward_batch(net, x);
  return {y.data(), y.data() + y.cols()};
}

AdamState make_adam(const Mlp& net, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  for (int l = 0; l < net.layer_count(); ++l) {
    state.m_weights.emplace_back(MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    state.v_weights.emplace_back(MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    state.m_biases.emplace_back(VectorXd::Zero(net.biases[l].size()));
    state.v_biases.emplace_back(VectorXd::Zero(net.biases[l].size()));
  }
  return state;
}

void adam_step(AdamState& state, Mlp& net, const MlpGrads& grads) {
  require(state.m_weights.size() == net.weights.size() &&
              grads.weights.size() == net.weights.size(),
          ErrorCode::ShapeMismatch, "optimizer/net layer counts differ");
  const AdamConfig& cfg = state.config;
  state.step += 1;
  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    require(grads.weights[l].rows() == net.weights[l].rows() &&
                grads.weights[l].cols() == net.weights[l].cols(),
            ErrorCode::ShapeMismatch, "gradient shape mismatch");
    auto& mw = state.m_weights[l];
    auto& vw = state.v_weights[l];
    mw = cfg.beta1 * mw + (1.0 - cfg.beta1) * grads.weights[l];
    vw = cfg.beta2 * vw.array() + (1.0 - cfg.beta2) * grads.weights[l].array().square();
    net.weights[l].array() -=
        cfg.learning_rate * (mw.array() / bias1) /
        ((vw.array() / bias2).sqrt() + cfg.epsilon);

    auto& mb = state.m_biases[l];
    auto& vb = state.v_biases[l];
    mb = cfg.beta1 * mb + (1.0 - cfg.beta1) * grads.biases[l];
    vb = cfg.beta2 * vb.array() + (1.0 - cfg.beta2) * grads.biases[l].array().square();
    net.biases[l].array() -=
        cfg.learning_rate * (mb.array() / bias1) /
        ((vb.array() / bias2).sqrt() + cfg.epsilon);
  }
  net.version += 1;
}

void ScalarAdam::update(double& parameter, double grad) {
  step += 1;
  m = config.beta1 * m + (1.0 - config.beta1) * grad;
  v = config.beta2 * v + (1.0 - config.beta2) * grad * grad;
  const double m_hat = m / (1.0 - std::pow(config.beta1, static_cast<double>(step)));
  const double v_hat = v / (1.0 - std::pow(config.beta2, static_cast<double>(step)));
  parameter -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
}

double log1m_tanh_sq(double u) {
  // log(1 - tanh(u)^2) without cancellation near |tanh(u)| = 1.
  const double softplus = u < -20.0 ? -2.0 * u : std::log1p(std::exp(-2.0 * u));
  return 2.0 * (std::log(2.0) - u - softplus);
}

SquashedSample squashed_gaussian_sample(std::span<const double> mean,
                                        std::span<const double> log_std,
                                        std::span<const double> noise) {
  require(mean.size() == log_std.size() && mean.size() == noise.size(),
          ErrorCode::DimensionMismatch, "policy head sizes differ");
  constexpr double kHalfLog2Pi = 0.9189385332046727;
  SquashedSample out;
  out.action.resize(mean.size());
  out.pre_tanh.resize(mean.size());
  double log_prob = 0.0;
  for (std::size_t d = 0; d < mean.size(); ++d) {
    const double ls = std::clamp(log_std[d], kLogStdMin, kLogStdMax);
    const double u = mean[d] + std::exp(ls) * noise[d];
    out.pre_tanh[d] = u;
    // tanh rounds to +-1.0 for |u| >~ 19; keep the action strictly interior.
    constexpr double kBound = 1.0 - 1e-12;
    out.action[d] = std::clamp(std::tanh(u), -kBound, kBound);
    log_prob += -0.5 * noise[d] * noise[d] - ls - kHalfLog2Pi;
    log_prob -= log1m_tanh_sq(u);
  }
  out.log_prob = log_prob;
  return out;
}

// --- checkpoint io ---------------------------------------------------------

namespace {

constexpr std::uint32_t kMlpMagic = 0x4d4c5031;   // "MLP1"
constexpr std::uint32_t kAdamMagic = 0x4144414d;  // "ADAM"

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  require(in.good(), ErrorCode::IoError, "truncated checkpoint stream");
  return value;
}

void write_matrix(std::ostream& out, const MatrixXd& m) {
  write_pod<std::int64_t>(out, m.rows());
  write_pod<std::int64_t>(out, m.cols());
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

MatrixXd read_matrix(std::istream& in) {
  const auto rows = read_pod<std::int64_t>(in);
  const auto cols = read_pod<std::int64_t>(in);
  MatrixXd m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  require(in.good(), ErrorCode::IoError, "truncated matrix payload");
  return m;
}

void write_vector(std::ostream& out, const VectorXd& v) {
  write_pod<std::int64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * v.size()));
}

VectorXd read_vector(std::istream& in) {
  const auto n = read_pod<std::int64_t>(in);
  VectorXd v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * v.size()));
  require(in.good(), ErrorCode::IoError, "truncated vector payload");
  return v;
}

}  // namespace

void save_mlp(std::ostream& out, const Mlp& net) {
  write_pod(out, kMlpMagic);
  write_pod<std::int32_t>(out, net.layer_count());
  write_pod<std::uint64_t>(out, net.version);
  for (int l = 0; l < net.layer_count(); ++l) {
    write_matrix(out, net.weights[l]);
    write_vector(out, net.biases[l]);
  }
}

Mlp load_mlp(std::istream& in) {
  require(read_pod<std::uint32_t>(in) == kMlpMagic, ErrorCode::IoError,
          "not an MLP checkpoint section");
  const auto layers = read_pod<std::int32_t>(in);
  Mlp net;
  net.version = read_pod<std::uint64_t>(in);
  for (int l = 0; l < layers; ++l) {
    net.weights.push_back(read_matrix(in));
    net.biases.push_back(read_vector(in));
  }
  return net;
}

void save_adam(std::ostream& out, const AdamState& state) {
  write_pod(out, kAdamMagic);
  write_pod(out, state.config.learning_rate);
  write_pod(out, state.config.beta1);
  write_pod(out, state.config.beta2);
  write_pod(out, state.config.epsilon);
  write_pod<std::int64_t>(out, state.step);
  write_pod<std::int32_t>(out, static_cast<std::int32_t>(state.m_weights.size()));
  for (std::size_t l = 0; l < state.m_weights.size(); ++l) {
    write_matrix(out, state.m_weights[l]);
    write_matrix(out, state.v_weights[l]);
    write_vector(out, state.m_biases[l]);
    write_vector(out, state.v_biases[l]);
  }
}

AdamState load_adam(std::istream& in) {
  require(read_pod<std::uint32_t>(in) == kAdamMagic, ErrorCode::IoError,
          "not an Adam checkpoint section");
  AdamState state;
  state.config.learning_rate = read_pod<double>(in);
  state.config.beta1 = read_pod<double>(in);
  state.config.beta2 = read_pod<double>(in);
  state.config.epsilon = read_pod<double>(in);
  state.step = read_pod<std::int64_t>(in);
  const auto layers = read_pod<std::int32_t>(in);
  for (int l = 0; l < layers; ++l) {
    state.m_weights.push_back(read_matrix(in));
    state.v_weights.push_back(read_matrix(in));
    state.m_biases.push_back(read_vector(in));
    state.v_biases.push_back(read_vector(in));
  }
  return state;
}

}  // namespace disco::nn
