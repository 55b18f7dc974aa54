#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "disco/nn.hpp"
#include "disco/rng.hpp"

using namespace disco;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Central finite differences of a scalar loss over every parameter.
template <typename LossFn>
double max_rel_grad_error(nn::Mlp& net, const nn::MlpGrads& analytic, LossFn loss,
                          double h = 1e-5) {
  double worst = 0.0;
  auto probe = [&](double& param, double grad) {
    const double saved = param;
    param = saved + h;
    net.version += 1;
    const double up = loss();
    param = saved - h;
    net.version += 1;
    const double down = loss();
    param = saved;
    net.version += 1;
    const double fd = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(fd), std::abs(grad), 1e-6});
    worst = std::max(worst, std::abs(fd - grad) / scale);
  };
  for (int l = 0; l < net.layer_count(); ++l) {
    for (int i = 0; i < net.weights[l].rows(); ++i)
      for (int j = 0; j < net.weights[l].cols(); ++j)
        probe(net.weights[l](i, j), analytic.weights[l](i, j));
    for (int j = 0; j < net.biases[l].size(); ++j)
      probe(net.biases[l](j), analytic.biases[l](j));
  }
  return worst;
}

}  // namespace

TEST_CASE("forward: zero weights pass the bias through") {
  Rng rng(1);
  nn::Mlp net = nn::make_mlp({3, 2}, rng);
  net.weights[0].setZero();
  net.biases[0] << 0.5, -1.5;

  const auto y = nn::mlp_forward(net, std::vector<double>{1.0, 2.0, 3.0});
  CHECK(y[0] == doctest::Approx(0.5));
  CHECK(y[1] == doctest::Approx(-1.5));
}

TEST_CASE("forward: single linear layer is a matrix product") {
  Rng rng(2);
  nn::Mlp net = nn::make_mlp({2, 2}, rng);
  net.weights[0] << 1.0, 3.0, 2.0, 4.0;  // column-major fill: W = [[1,3],[2,4]]
  net.biases[0] << 0.1, -0.2;

  const auto y = nn::mlp_forward(net, std::vector<double>{5.0, 7.0});
  // y = x W + b with x as a row vector.
  CHECK(y[0] == doctest::Approx(5.0 * 1.0 + 7.0 * 2.0 + 0.1));
  CHECK(y[1] == doctest::Approx(5.0 * 3.0 + 7.0 * 4.0 - 0.2));
}

TEST_CASE("forward: rectifier zeroes negative pre-activations") {
  Rng rng(3);
  nn::Mlp net = nn::make_mlp({1, 4, 1}, rng);
  net.weights[0].setOnes();
  net.biases[0].setZero();
  net.weights[1].setOnes();
  net.biases[1].setZero();

  // Negative input -> all hidden pre-activations negative -> output 0.
  const auto y = nn::mlp_forward(net, std::vector<double>{-2.0});
  CHECK(y[0] == 0.0);
}

TEST_CASE("forward: doubling final-layer weights doubles the output") {
  Rng rng(4);
  nn::Mlp net = nn::make_mlp({3, 8, 2}, rng, 0.1);
  const std::vector<double> x{0.3, -0.7, 1.1};
  const auto y1 = nn::mlp_forward(net, x);
  net.weights.back() *= 2.0;
  net.biases.back() *= 2.0;
  net.version += 1;
  const auto y2 = nn::mlp_forward(net, x);
  CHECK(y2[0] == doctest::Approx(2.0 * y1[0]));
  CHECK(y2[1] == doctest::Approx(2.0 * y1[1]));
}

TEST_CASE("backward: analytic gradients match finite differences") {
  for (std::uint64_t seed : {10, 11, 12, 13}) {
    Rng rng(seed);
    nn::Mlp net = nn::make_mlp({4, 8, 8, 3}, rng, 0.5);
    MatrixXd x(5, 4);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    MatrixXd target(5, 3);
    for (int i = 0; i < target.size(); ++i) target.data()[i] = rng.normal();

    auto loss_value = [&]() {
      const MatrixXd y = nn::forward_batch(net, x);
      return 0.5 * (y - target).squaredNorm();
    };

    nn::MlpCache cache;
    const MatrixXd y = nn::forward_batch(net, x, &cache);
    const nn::MlpGrads grads = nn::backward_batch(cache, y - target);

    CHECK(max_rel_grad_error(net, grads, loss_value) < 1e-4);
  }
}

TEST_CASE("backward: zero output gradient gives zero parameter gradients") {
  Rng rng(20);
  nn::Mlp net = nn::make_mlp({3, 6, 2}, rng);
  MatrixXd x = MatrixXd::Random(4, 3);
  nn::MlpCache cache;
  nn::forward_batch(net, x, &cache);
  const nn::MlpGrads grads = nn::backward_batch(cache, MatrixXd::Zero(4, 2));
  for (const auto& w : grads.weights) CHECK(w.cwiseAbs().maxCoeff() == 0.0);
  for (const auto& b : grads.biases) CHECK(b.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward: identity single layer passes the gradient through") {
  Rng rng(21);
  nn::Mlp net = nn::make_mlp({3, 3}, rng);
  net.weights[0].setIdentity();
  net.biases[0].setZero();
  MatrixXd x = MatrixXd::Random(2, 3);
  nn::MlpCache cache;
  nn::forward_batch(net, x, &cache);
  MatrixXd dy = MatrixXd::Random(2, 3);
  MatrixXd dx;
  nn::backward_batch(cache, dy, &dx);
  CHECK((dx - dy).cwiseAbs().maxCoeff() == 0.0);
  CHECK((nn::backward_input_only(cache, dy) - dy).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward: stale cache is rejected") {
  Rng rng(22);
  nn::Mlp net = nn::make_mlp({2, 2}, rng);
  nn::MlpCache cache;
  nn::forward_batch(net, MatrixXd::Random(1, 2), &cache);
  net.version += 1;  // simulate a parameter update
  CHECK_THROWS_AS(nn::backward_batch(cache, MatrixXd::Zero(1, 2)), Error);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Rng rng(30);
  nn::Mlp net = nn::make_mlp({2, 3, 1}, rng);
  const nn::Mlp before = net;
  nn::AdamState opt = nn::make_adam(net);
  nn::MlpGrads grads;
  for (int l = 0; l < net.layer_count(); ++l) {
    grads.weights.emplace_back(
        MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    grads.biases.emplace_back(VectorXd::Zero(net.biases[l].size()));
  }
  nn::adam_step(opt, net, grads);
  for (int l = 0; l < net.layer_count(); ++l) {
    CHECK(net.weights[l] == before.weights[l]);
    CHECK(net.biases[l] == before.biases[l]);
  }
  CHECK(opt.step == 1);
}

TEST_CASE("adam: first step matches the bias-corrected formula") {
  Rng rng(31);
  nn::Mlp net = nn::make_mlp({1, 1}, rng);
  const double w0 = net.weights[0](0, 0);
  nn::AdamConfig cfg;
  cfg.learning_rate = 1e-2;
  nn::AdamState opt = nn::make_adam(net, cfg);

  nn::MlpGrads grads;
  grads.weights.emplace_back(MatrixXd::Constant(1, 1, 0.7));
  grads.biases.emplace_back(VectorXd::Zero(1));
  nn::adam_step(opt, net, grads);

  // After one step m_hat = g, v_hat = g^2, so the move is -lr g/(|g| + eps).
  const double expected = w0 - 1e-2 * 0.7 / (std::abs(0.7) + cfg.epsilon);
  CHECK(net.weights[0](0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("adam: deterministic across identical runs") {
  auto run = [] {
    Rng rng(32);
    nn::Mlp net = nn::make_mlp({2, 4, 1}, rng);
    nn::AdamState opt = nn::make_adam(net);
    for (int step = 0; step < 10; ++step) {
      MatrixXd x = MatrixXd::Constant(3, 2, 0.5 + step * 0.01);
      nn::MlpCache cache;
      const MatrixXd y = nn::forward_batch(net, x, &cache);
      nn::adam_step(opt, net, nn::backward_batch(cache, y));
    }
    return net;
  };
  const nn::Mlp a = run();
  const nn::Mlp b = run();
  for (int l = 0; l < a.layer_count(); ++l) CHECK(a.weights[l] == b.weights[l]);
}

TEST_CASE("squashed sample: deterministic mode and hand values") {
  const std::vector<double> mean{0.4};
  const std::vector<double> log_std{0.0};
  const std::vector<double> zero{0.0};
  const auto s = nn::squashed_gaussian_sample(mean, log_std, zero);
  CHECK(s.action[0] == doctest::Approx(std::tanh(0.4)));

  // 1-D, mean 0, log_std 0, noise 0: log N(0;0,1) - log(1 - 0).
  const auto at_zero = nn::squashed_gaussian_sample(std::vector<double>{0.0},
                                                    log_std, zero);
  CHECK(at_zero.action[0] == 0.0);
  CHECK(at_zero.log_prob == doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));
}

TEST_CASE("squashed sample: actions stay strictly inside (-1, 1)") {
  Rng rng(40);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::vector<double> mean{rng.uniform(-50.0, 50.0)};
    const std::vector<double> log_std{rng.uniform(-30.0, 5.0)};
    const std::vector<double> noise{rng.normal()};
    const auto s = nn::squashed_gaussian_sample(mean, log_std, noise);
    CHECK(s.action[0] > -1.0);
    CHECK(s.action[0] < 1.0);
    CHECK(std::isfinite(s.log_prob));
  }
}

TEST_CASE("squashed sample: histogram matches the stated density") {
  // 10^6 samples of a 1-D squashed Gaussian; the empirical density on
  // [-0.9, 0.9] must match exp(log_prob) within 3% of the peak.
  const std::vector<double> mean{0.2};
  const std::vector<double> log_std{-0.3};
  Rng rng(41);

  const int bins = 36;
  const double lo = -0.9, hi = 0.9;
  const double width = (hi - lo) / bins;
  std::vector<double> counts(bins, 0.0);
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const std::vector<double> noise{rng.normal()};
    const auto s = nn::squashed_gaussian_sample(mean, log_std, noise);
    if (s.action[0] >= lo && s.action[0] < hi)
      counts[static_cast<int>((s.action[0] - lo) / width)] += 1.0;
  }

  double max_density = 0.0;
  std::vector<double> expected(bins);
  for (int b = 0; b < bins; ++b) {
    const double a = lo + (b + 0.5) * width;
    const double u = std::atanh(a);
    const double sigma = std::exp(log_std[0]);
    const double log_pdf = -0.5 * std::pow((u - mean[0]) / sigma, 2) -
                           std::log(sigma) - 0.5 * std::log(2.0 * M_PI) -
                           nn::log1m_tanh_sq(u);
    expected[b] = std::exp(log_pdf);
    max_density = std::max(max_density, expected[b]);
  }
  for (int b = 0; b < bins; ++b) {
    const double empirical = counts[b] / (n * width);
    CHECK(std::abs(empirical - expected[b]) < 0.03 * max_density);
  }
}

TEST_CASE("checkpoints: bit-exact round trip") {
  Rng rng(50);
  nn::Mlp net = nn::make_mlp({5, 16, 16, 3}, rng, 0.01);
  nn::AdamState opt = nn::make_adam(net);
  // Take a few steps so the moments are non-trivial.
  for (int step = 0; step < 3; ++step) {
    MatrixXd x = MatrixXd::Random(4, 5);
    nn::MlpCache cache;
    const MatrixXd y = nn::forward_batch(net, x, &cache);
    nn::adam_step(opt, net, nn::backward_batch(cache, y));
  }

  std::stringstream stream(std::ios::in | std::ios::out | std::ios::binary);
  nn::save_mlp(stream, net);
  nn::save_adam(stream, opt);
  const nn::Mlp net2 = nn::load_mlp(stream);
  const nn::AdamState opt2 = nn::load_adam(stream);

  for (int l = 0; l < net.layer_count(); ++l) {
    CHECK(net.weights[l] == net2.weights[l]);
    CHECK(net.biases[l] == net2.biases[l]);
    CHECK(opt.m_weights[l] == opt2.m_weights[l]);
    CHECK(opt.v_weights[l] == opt2.v_weights[l]);
  }
  CHECK(opt2.step == opt.step);
  CHECK(net2.version == net.version);

  // Saving the reloaded state reproduces the byte stream exactly.
  std::stringstream stream2(std::ios::in | std::ios::out | std::ios::binary);
  nn::save_mlp(stream2, net2);
  nn::save_adam(stream2, opt2);
  CHECK(stream2.str() == stream.str());
}
