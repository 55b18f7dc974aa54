#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "disco/distributions.hpp"
#include "disco/mathcore.hpp"
#include "disco/rng.hpp"
#include "test_util.hpp"

using namespace disco;
using dist::ExampleSet;
using dist::GaussianParams;
using dist::GaussianPosterior;
using math::Matrix;

namespace {

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m(0, 0) = a;
  m(0, 1) = b;
  m(1, 0) = c;
  m(1, 1) = d;
  return m;
}

}  // namespace

TEST_CASE("smooth_precision: identity is a fixed point") {
  CHECK(dist::smooth_precision(Matrix::identity(2)) == Matrix::identity(2));
}

TEST_CASE("smooth_precision: correlated 2x2") {
  // inverse = (1/0.19) [[1,-0.9],[-0.9,1]]; normalizing by its max-abs entry
  // restores [[1,-0.9],[-0.9,1]] and 0.9 survives the 0.25 threshold.
  const Matrix smoothed = dist::smooth_precision(mat2(1.0, 0.9, 0.9, 1.0));
  CHECK(smoothed(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(smoothed(0, 1) == doctest::Approx(-0.9).epsilon(1e-12));
  CHECK(smoothed(1, 0) == doctest::Approx(-0.9).epsilon(1e-12));
  CHECK(smoothed(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("smooth_precision: thresholding zeroes weak entries") {
  // inverse of diag(1, 100) is diag(1, 0.01); 0.01 < 0.25 becomes exactly 0.
  const Matrix smoothed = dist::smooth_precision(mat2(1.0, 0.0, 0.0, 100.0));
  CHECK(smoothed(0, 0) == 1.0);
  CHECK(smoothed(1, 1) == 0.0);
  CHECK(smoothed(0, 1) == 0.0);
}

TEST_CASE("smooth_precision: max-abs entry is exactly one") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(6));
    const Matrix cov = testutil::random_spd(n, rng);
    const Matrix smoothed = dist::smooth_precision(cov);
    CHECK(smoothed.max_abs() == 1.0);
    for (double v : smoothed.data()) {
      if (v != 0.0) CHECK(std::abs(v) >= 0.25);
    }
  }
}

TEST_CASE("smooth_precision: idempotent zero pattern") {
  const Matrix fixed = mat2(1.0, -0.9, -0.9, 1.0);
  const Matrix again = dist::smooth_precision(math::inverse_psd(fixed));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK((again(i, j) == 0.0) == (fixed(i, j) == 0.0));

  const Matrix sparse = mat2(1.0, 0.0, 0.0, 0.3);
  const Matrix sparse_again = dist::smooth_precision(math::inverse_psd(sparse));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK((sparse_again(i, j) == 0.0) == (sparse(i, j) == 0.0));
}

TEST_CASE("gaussian_reward: zero at the mean, quadratic away from it") {
  GaussianParams omega;
  omega.mean = {0.0, 0.0};
  omega.cov = Matrix::identity(2);
  omega.precision = Matrix::identity(2);

  CHECK(dist::gaussian_reward(omega.mean, omega) == 0.0);
  CHECK(dist::gaussian_reward(std::vector<double>{1.0, 1.0}, omega) ==
        doctest::Approx(-1.0));

  omega.precision = mat2(1.0, -0.9, -0.9, 1.0);
  // -0.5 (1 + 1 - 2*0.9) = -0.1
  CHECK(dist::gaussian_reward(std::vector<double>{1.0, 1.0}, omega) ==
        doctest::Approx(-0.1));

  CHECK_THROWS_AS(dist::gaussian_reward(std::vector<double>{1.0}, omega), Error);
}

TEST_CASE("gaussian_reward: non-positive whenever the precision stayed PSD") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(5));
    ExampleSet set;
    for (int k = 0; k < 12; ++k) {
      std::vector<double> s(n);
      for (double& v : s) v = rng.uniform(0.0, 8.0);
      set.states.push_back(std::move(s));
    }
    Rng fit_rng(trial);
    const GaussianParams omega = dist::fit_gaussian_mle(set, fit_rng);
    if (!omega.precision_psd) continue;
    for (int probe = 0; probe < 20; ++probe) {
      std::vector<double> s(n);
      for (double& v : s) v = rng.uniform(-2.0, 10.0);
      CHECK(dist::gaussian_reward(s, omega) <= 1e-12);
    }
  }
}

TEST_CASE("gaussian_reward gradient vanishes at the mean") {
  Rng rng(3);
  ExampleSet set;
  for (int k = 0; k < 20; ++k)
    set.states.push_back({rng.uniform(0.0, 8.0), rng.uniform(0.0, 8.0)});
  Rng fit_rng(4);
  const GaussianParams omega = dist::fit_gaussian_mle(set, fit_rng);
  for (double g : dist::gaussian_reward_gradient(omega.mean, omega)) CHECK(g == 0.0);
}

TEST_CASE("fit_gaussian_mle: two points by hand") {
  ExampleSet set;
  set.states = {{0.0, 0.0}, {2.0, 0.0}};
  Rng rng(0);
  const GaussianParams params = dist::fit_gaussian_mle(set, rng);
  CHECK(params.mean[0] == doctest::Approx(1.0));
  CHECK(params.mean[1] == doctest::Approx(0.0));
  CHECK(params.cov(0, 0) == doctest::Approx(1.0));  // 1/K normalization
  CHECK(params.cov(0, 1) == doctest::Approx(0.0));
  CHECK(params.cov(1, 1) == doctest::Approx(0.0));
}

TEST_CASE("fit_gaussian_mle: duplicated points give zero covariance") {
  ExampleSet set;
  for (int i = 0; i < 5; ++i) set.states.push_back({3.0, 4.0});
  Rng rng(0);
  const GaussianParams params = dist::fit_gaussian_mle(set, rng);
  CHECK(params.mean[0] == doctest::Approx(3.0));
  CHECK(params.mean[1] == doctest::Approx(4.0));
  CHECK(params.cov.max_abs() == 0.0);
  // Smoothing still produces a usable precision via the zero-matrix floor.
  CHECK(params.precision.all_finite());
}

TEST_CASE("fit_gaussian_mle: recovers a known generator") {
  const std::vector<double> mu0{1.0, -2.0, 0.5};
  Matrix sigma0(3, 3);
  sigma0(0, 0) = 1.5;
  sigma0(1, 1) = 0.8;
  sigma0(2, 2) = 1.1;
  sigma0(0, 1) = sigma0(1, 0) = 0.4;
  sigma0(0, 2) = sigma0(2, 0) = -0.2;
  sigma0(1, 2) = sigma0(2, 1) = 0.1;
  const Matrix lower = math::cholesky(sigma0);

  Rng rng(2024);
  ExampleSet set;
  for (int k = 0; k < 10000; ++k) {
    std::vector<double> z{rng.normal(), rng.normal(), rng.normal()};
    std::vector<double> s = mu0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j <= i; ++j) s[i] += lower(i, j) * z[j];
    set.states.push_back(std::move(s));
  }
  Rng fit_rng(1);
  const GaussianParams params = dist::fit_gaussian_mle(set, fit_rng);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(params.mean[i] - mu0[i]) < 0.05);
  CHECK(testutil::rel_frobenius_error(params.cov, sigma0) < 0.1);
}

TEST_CASE("fit_gaussian_mle: rejects fewer than two examples") {
  ExampleSet set;
  set.states = {{1.0, 2.0}};
  Rng rng(0);
  CHECK_THROWS_AS(dist::fit_gaussian_mle(set, rng), Error);
}

TEST_CASE("fit_gmm_em: single component equals the MLE fit") {
  Rng data_rng(8);
  ExampleSet set;
  for (int k = 0; k < 40; ++k)
    set.states.push_back({data_rng.uniform(0.0, 4.0), data_rng.uniform(0.0, 4.0)});

  Rng rng_a(5), rng_b(5);
  const GaussianParams mle = dist::fit_gaussian_mle(set, rng_a);
  dist::GmmFitConfig fit;
  fit.components = 1;
  const dist::GmmParams gmm = dist::fit_gmm_em(set, rng_b, fit);

  REQUIRE(gmm.components.size() == 1);
  CHECK(gmm.weights[0] == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 0; i < 2; ++i)
    CHECK(gmm.components[0].mean[i] == doctest::Approx(mle.mean[i]).epsilon(1e-9));
  CHECK(testutil::max_abs_diff(gmm.components[0].cov, mle.cov) < 1e-9);
}

TEST_CASE("fit_gmm_em: recovers two separated clusters") {
  Rng data_rng(9);
  ExampleSet set;
  for (int k = 0; k < 100; ++k) {
    const double cx = (k % 2 == 0) ? 0.0 : 6.0;
    set.states.push_back(
        {cx + 0.1 * data_rng.normal(), cx + 0.1 * data_rng.normal()});
  }
  dist::GmmFitConfig fit;
  fit.components = 2;
  Rng rng(123);
  const dist::GmmParams gmm = dist::fit_gmm_em(set, rng, fit);

  REQUIRE(gmm.components.size() == 2);
  std::vector<double> c0 = gmm.components[0].mean;
  std::vector<double> c1 = gmm.components[1].mean;
  if (c0[0] > c1[0]) std::swap(c0, c1);
  CHECK(math::norm(math::sub(c0, std::vector<double>{0.0, 0.0})) < 0.1);
  CHECK(math::norm(math::sub(c1, std::vector<double>{6.0, 6.0})) < 0.1);
  CHECK(std::abs(gmm.weights[0] - 0.5) < 0.05);
  CHECK(std::abs(gmm.weights[1] - 0.5) < 0.05);
}

TEST_CASE("fit_gmm_em: log-likelihood is non-decreasing") {
  Rng data_rng(77);
  ExampleSet set;
  for (int k = 0; k < 60; ++k) {
    const double cx = (k % 3 == 0) ? 0.0 : (k % 3 == 1 ? 3.0 : 6.0);
    set.states.push_back(
        {cx + 0.4 * data_rng.normal(), -cx + 0.4 * data_rng.normal()});
  }
  dist::GmmFitConfig fit;
  fit.components = 3;
  Rng rng(31);
  const dist::GmmFitTrace trace = dist::fit_gmm_em_traced(set, rng, fit);
  REQUIRE(trace.log_likelihood.size() >= 2);
  CHECK(trace.reseed_iterations.empty());
  for (std::size_t i = 1; i < trace.log_likelihood.size(); ++i)
    CHECK(trace.log_likelihood[i] >= trace.log_likelihood[i - 1] - 1e-9);
}

TEST_CASE("gmm_reward: one component equals the full log-density") {
  Rng rng(14);
  ExampleSet set;
  for (int k = 0; k < 30; ++k)
    set.states.push_back({rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)});
  dist::GmmFitConfig fit;
  fit.components = 1;
  Rng fit_rng(6);
  const dist::GmmParams gmm = dist::fit_gmm_em(set, fit_rng, fit);

  const std::vector<double> s{0.7, 1.3};
  CHECK(dist::gmm_reward(s, gmm) ==
        doctest::Approx(dist::log_gaussian_pdf(s, gmm.components[0].mean,
                                               gmm.components[0].cov))
            .epsilon(1e-12));
}

TEST_CASE("gmm_reward: well-separated modes and symmetry") {
  dist::GmmParams gmm;
  gmm.weights = {0.5, 0.5};
  for (double center : {-10.0, 10.0}) {
    GaussianParams comp;
    comp.mean = {center};
    comp.cov = Matrix::identity(1);
    comp.precision = Matrix::identity(1);
    gmm.components.push_back(comp);
  }

  const double at_mode = dist::gmm_reward(std::vector<double>{10.0}, gmm);
  const double expected = std::log(0.5) - 0.5 * std::log(2.0 * M_PI);
  CHECK(at_mode == doctest::Approx(expected).epsilon(1e-9));

  // Mixture is symmetric under s -> -s.
  CHECK(dist::gmm_reward(std::vector<double>{0.0}, gmm) ==
        doctest::Approx(dist::gmm_reward(std::vector<double>{-0.0}, gmm)));
  CHECK(dist::gmm_reward(std::vector<double>{3.0}, gmm) ==
        doctest::Approx(dist::gmm_reward(std::vector<double>{-3.0}, gmm)));

  // Log-sum-exp dominates each single term.
  for (double s : {-10.0, -2.0, 0.0, 5.0}) {
    double best = -1e300;
    for (int j = 0; j < 2; ++j)
      best = std::max(best, std::log(gmm.weights[j]) +
                                dist::log_gaussian_pdf(std::vector<double>{s},
                                                       gmm.components[j].mean,
                                                       gmm.components[j].cov));
    CHECK(dist::gmm_reward(std::vector<double>{s}, gmm) >= best);
  }
}

TEST_CASE("moment_match: fixed points and the two-posterior case") {
  GaussianPosterior p;
  p.mean = {0.4, -1.2};
  p.var = {0.5, 2.0};
  const auto single = dist::moment_match({p});
  CHECK(single.mean_z[0] == doctest::Approx(0.4));
  CHECK(single.var_z[1] == doctest::Approx(2.0));

  const auto repeated = dist::moment_match({p, p, p});
  CHECK(repeated.mean_z[0] == doctest::Approx(0.4));
  CHECK(repeated.var_z[0] == doctest::Approx(0.5));

  GaussianPosterior a, b;
  a.mean = {-1.0};
  a.var = {1.0};
  b.mean = {1.0};
  b.var = {1.0};
  const auto merged = dist::moment_match({a, b});
  CHECK(merged.mean_z[0] == doctest::Approx(0.0));
  CHECK(merged.var_z[0] == doctest::Approx(2.0));

  CHECK_THROWS_AS(dist::moment_match({}), Error);
}

TEST_CASE("latent_reward: diagonal Gaussian surrogate") {
  dist::LatentGaussianParams omega;
  omega.mean_z = {0.0};
  omega.var_z = {1.0};
  const dist::Encoder identity_1d = [](std::span<const double> s) {
    return GaussianPosterior{{s[0]}, {1.0}};
  };

  // At the latent mean only the normalizer remains.
  CHECK(dist::latent_reward(std::vector<double>{0.0}, omega, identity_1d) ==
        doctest::Approx(-0.5 * std::log(2.0 * M_PI)));
  // One dimension, encoder mean 2: -0.5 log(2 pi) - 2.
  CHECK(dist::latent_reward(std::vector<double>{2.0}, omega, identity_1d) ==
        doctest::Approx(-0.5 * std::log(2.0 * M_PI) - 2.0));
}

TEST_CASE("latent_reward: identity encoder reduces to the state-space density") {
  dist::LatentGaussianParams omega;
  omega.mean_z = {1.0, -0.5};
  omega.var_z = {0.7, 1.4};
  const dist::Encoder identity_2d = [](std::span<const double> s) {
    return GaussianPosterior{{s[0], s[1]}, {1.0, 1.0}};
  };
  const std::vector<double> s{0.3, 0.9};
  const Matrix cov = Matrix::diagonal(omega.var_z);
  CHECK(dist::latent_reward(s, omega, identity_2d) ==
        doctest::Approx(dist::log_gaussian_pdf(s, omega.mean_z, cov)).epsilon(1e-12));
}

TEST_CASE("fit_joint_gaussian: duplicated halves correlate perfectly") {
  Rng data_rng(40);
  ExampleSet pairs;
  for (int k = 0; k < 200; ++k) {
    std::vector<double> s{data_rng.uniform(0.0, 8.0), data_rng.uniform(0.0, 8.0)};
    pairs.states.push_back(s);
    pairs.final_states.push_back(s);
  }
  Rng rng(0);
  const auto joint = dist::fit_joint_gaussian(pairs, rng);
  CHECK(testutil::max_abs_diff(joint.block(0, 1), joint.block(0, 0)) < 1e-9);
  CHECK(testutil::max_abs_diff(joint.block(1, 1), joint.block(0, 0)) < 1e-9);
}

TEST_CASE("fit_joint_gaussian: independent halves decorrelate") {
  Rng data_rng(41);
  ExampleSet pairs;
  for (int k = 0; k < 10000; ++k) {
    pairs.states.push_back({data_rng.normal()});
    pairs.final_states.push_back({data_rng.normal()});
  }
  Rng rng(0);
  const auto joint = dist::fit_joint_gaussian(pairs, rng);
  CHECK(joint.block(0, 1).max_abs() < 0.1);
}

TEST_CASE("fit_joint_gaussian: two pairs by hand") {
  ExampleSet pairs;
  pairs.states = {{1.0}, {2.0}};
  pairs.final_states = {{3.0}, {5.0}};
  Rng rng(0);
  const auto joint = dist::fit_joint_gaussian(pairs, rng);
  CHECK(joint.mean[0] == doctest::Approx(1.5));
  CHECK(joint.mean[1] == doctest::Approx(4.0));
  CHECK(joint.cov(0, 0) == doctest::Approx(0.25));
  CHECK(joint.cov(0, 1) == doctest::Approx(0.5));
  CHECK(joint.cov(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("fit_joint_gaussian: error paths") {
  ExampleSet unpaired;
  unpaired.states = {{1.0}, {2.0}};
  Rng rng(0);
  CHECK_THROWS_AS(dist::fit_joint_gaussian(unpaired, rng), Error);

  ExampleSet tiny;
  tiny.states = {{1.0}};
  tiny.final_states = {{2.0}};
  CHECK_THROWS_AS(dist::fit_joint_gaussian(tiny, rng), Error);
}

TEST_CASE("condition_gaussian: independence returns the marginal") {
  dist::JointGaussianParams joint;
  joint.half_dim = 1;
  joint.mean = {0.5, -1.0};
  joint.cov = mat2(2.0, 0.0, 0.0, 3.0);
  const GaussianParams cond = dist::condition_gaussian(joint, std::vector<double>{7.0});
  CHECK(cond.mean[0] == doctest::Approx(0.5));
  CHECK(cond.cov(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("condition_gaussian: zero innovation keeps the mean") {
  dist::JointGaussianParams joint;
  joint.half_dim = 1;
  joint.mean = {0.5, -1.0};
  joint.cov = mat2(1.0, 0.6, 0.6, 1.0);
  const GaussianParams cond = dist::condition_gaussian(joint, std::vector<double>{-1.0});
  CHECK(cond.mean[0] == doctest::Approx(0.5));
}

TEST_CASE("condition_gaussian: scalar identity") {
  const double rho = 0.6;
  dist::JointGaussianParams joint;
  joint.half_dim = 1;
  joint.mean = {0.5, -1.0};
  joint.cov = mat2(1.0, rho, rho, 1.0);

  const double s_f = 2.0;
  const GaussianParams cond = dist::condition_gaussian(joint, std::vector<double>{s_f});
  CHECK(cond.mean[0] == doctest::Approx(0.5 + rho * (s_f + 1.0)).epsilon(1e-9));
  CHECK(cond.cov(0, 0) == doctest::Approx(1.0 - rho * rho).epsilon(1e-9));
}

TEST_CASE("condition_gaussian: slope matches a sampled regression") {
  const double rho = 0.6;
  Rng rng(52);
  ExampleSet pairs;
  for (int k = 0; k < 20000; ++k) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    pairs.states.push_back({z1});
    pairs.final_states.push_back({rho * z1 + std::sqrt(1.0 - rho * rho) * z2});
  }
  Rng fit_rng(0);
  const auto joint = dist::fit_joint_gaussian(pairs, fit_rng);
  const dist::SubtaskConditioner conditioner(joint, 0);

  const double slope = conditioner.conditional_mean(std::vector<double>{1.0})[0] -
                       conditioner.conditional_mean(std::vector<double>{0.0})[0];
  CHECK(std::abs(slope - rho) < 0.02);
}

TEST_CASE("SubtaskConditioner matches condition_gaussian exactly") {
  Rng rng(61);
  ExampleSet pairs;
  for (int k = 0; k < 50; ++k) {
    const double shared = rng.uniform(0.0, 8.0);
    pairs.states.push_back({shared, rng.uniform(0.0, 8.0)});
    pairs.final_states.push_back({shared, rng.uniform(0.0, 8.0)});
  }
  pairs.noise_std = 0.01;
  Rng fit_rng(3);
  const auto joint = dist::fit_joint_gaussian(pairs, fit_rng);
  const dist::SubtaskConditioner conditioner(joint, 4);

  const std::vector<double> s_f{2.0, 6.5};
  const GaussianParams a = dist::condition_gaussian(joint, s_f);
  const GaussianParams b = conditioner.condition(s_f);
  CHECK(a.mean == b.mean);
  CHECK(a.precision == b.precision);
  CHECK(b.source_task == 4);

  // Conditional covariance is PSD (within numerical slack).
  const auto eig = math::sym_eigen(a.cov);
  for (double v : eig.values) CHECK(v > -1e-8);
}

TEST_CASE("serialization: example sets and parameters round-trip") {
  Rng rng(71);
  ExampleSet pairs;
  pairs.noise_std = 0.01;
  for (int k = 0; k < 5; ++k) {
    pairs.states.push_back({rng.uniform(0.0, 8.0), rng.uniform(0.0, 8.0)});
    pairs.final_states.push_back({rng.uniform(0.0, 8.0), rng.uniform(0.0, 8.0)});
  }
  const std::string text = dist::example_set_to_json(pairs, 99);
  const ExampleSet loaded = dist::example_set_from_json(text);
  CHECK(loaded.states == pairs.states);
  CHECK(loaded.final_states == pairs.final_states);
  CHECK(loaded.noise_std == pairs.noise_std);
  // Serialization is deterministic.
  CHECK(dist::example_set_to_json(loaded, 99) == text);

  Rng fit_rng(5);
  ExampleSet set;
  for (int k = 0; k < 12; ++k)
    set.states.push_back({rng.uniform(0.0, 8.0), rng.uniform(0.0, 8.0)});
  const GaussianParams params = dist::fit_gaussian_mle(set, fit_rng);
  const GaussianParams reloaded =
      dist::gaussian_params_from_json(dist::gaussian_params_to_json(params, {}));
  CHECK(reloaded.mean == params.mean);
  CHECK(reloaded.cov == params.cov);
  CHECK(reloaded.precision == params.precision);
}
