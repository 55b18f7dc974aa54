#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "disco/mathcore.hpp"
#include "disco/rng.hpp"
#include "test_util.hpp"

using namespace disco;
using math::Matrix;
using testutil::frobenius;
using testutil::random_spd;
using testutil::random_symmetric;
using testutil::rel_frobenius_error;

TEST_CASE("cholesky: identity and diagonal") {
  const Matrix id3 = Matrix::identity(3);
  CHECK(math::cholesky(id3) == id3);

  const std::vector<double> diag{4.0, 9.0};
  const Matrix lower = math::cholesky(Matrix::diagonal(diag));
  CHECK(lower(0, 0) == doctest::Approx(2.0));
  CHECK(lower(1, 1) == doctest::Approx(3.0));
  CHECK(lower(0, 1) == 0.0);
  CHECK(lower(1, 0) == 0.0);
}

TEST_CASE("cholesky: reconstructs random SPD input") {
  Rng rng(42);
  const Matrix a = random_spd(5, rng);
  const Matrix lower = math::cholesky(a);
  CHECK(rel_frobenius_error(lower * lower.transposed(), a) < 1e-8);
}

TEST_CASE("cholesky: round-trips across sizes") {
  Rng rng(7);
  for (int n : {1, 2, 3, 6, 12}) {
    const Matrix a = random_spd(n, rng);
    const Matrix lower = math::cholesky(a);
    CHECK(rel_frobenius_error(lower * lower.transposed(), a) < 1e-8);
  }
}

TEST_CASE("cholesky: rejects indefinite input after the jitter ladder") {
  const std::vector<double> diag{1.0, -1.0};
  CHECK_THROWS_WITH_AS(math::cholesky(Matrix::diagonal(diag)),
                       doctest::Contains("jitter"), Error);
}

TEST_CASE("cholesky: rejects asymmetric input") {
  Matrix a(2, 2);
  a(0, 0) = 1.0;
  a(0, 1) = 0.5;
  a(1, 0) = 0.3;
  a(1, 1) = 1.0;
  CHECK_THROWS_AS(math::cholesky(a), Error);
}

TEST_CASE("sym_eigen: identity") {
  const auto eig = math::sym_eigen(Matrix::identity(4));
  for (double v : eig.values) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("sym_eigen: 2x2 characteristic roots") {
  Matrix a(2, 2);
  a(0, 0) = 2.0;
  a(0, 1) = 1.0;
  a(1, 0) = 1.0;
  a(1, 1) = 2.0;
  const auto eig = math::sym_eigen(a);
  // det(A - xI) = (2-x)^2 - 1 = 0 -> x = 3, 1.
  CHECK(eig.values[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(eig.values[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sym_eigen: residuals and orthonormality on random symmetric input") {
  Rng rng(1234);
  const Matrix a = random_symmetric(6, rng);
  const auto eig = math::sym_eigen(a);

  for (int j = 0; j < 6; ++j) {
    std::vector<double> v(6);
    for (int i = 0; i < 6; ++i) v[i] = eig.vectors(i, j);
    const std::vector<double> av = a * std::span<const double>(v);
    double resid = 0.0;
    for (int i = 0; i < 6; ++i) resid += std::pow(av[i] - eig.values[j] * v[i], 2);
    CHECK(std::sqrt(resid) < 1e-8);
  }

  const Matrix gram = eig.vectors.transposed() * eig.vectors;
  CHECK(testutil::max_abs_diff(gram, Matrix::identity(6)) < 1e-8);
}

TEST_CASE("sym_eigen: iteration cap trips NoConvergence") {
  math::MathConfig cfg;
  cfg.max_jacobi_sweeps = 0;
  Matrix a(2, 2);
  a(0, 0) = 2.0;
  a(0, 1) = 1.0;
  a(1, 0) = 1.0;
  a(1, 1) = 2.0;
  CHECK_THROWS_AS(math::sym_eigen(a, cfg), Error);
}

TEST_CASE("cap_condition: identity unchanged") {
  CHECK(math::cap_condition(Matrix::identity(3)) == Matrix::identity(3));
}

TEST_CASE("cap_condition: shifts an ill-conditioned diagonal") {
  const std::vector<double> diag{1.0, 1e-6};
  const Matrix capped = math::cap_condition(Matrix::diagonal(diag));
  // Solve (1+c)/(1e-6+c) = 100 for c.
  const double c = (1.0 - 100.0 * 1e-6) / 99.0;
  CHECK(capped(0, 0) == doctest::Approx(1.0 + c).epsilon(1e-10));
  CHECK(capped(1, 1) == doctest::Approx(1e-6 + c).epsilon(1e-10));
}

TEST_CASE("cap_condition: leaves compliant matrices alone") {
  const std::vector<double> diag{50.0, 1.0};
  const Matrix a = Matrix::diagonal(diag);
  CHECK(math::cap_condition(a) == a);
}

TEST_CASE("cap_condition: zero matrix maps to the floor") {
  const Matrix capped = math::cap_condition(Matrix(3, 3));
  CHECK(capped == 1e-6 * Matrix::identity(3));
  CHECK(std::isfinite(math::log_det_psd(capped)));
}

TEST_CASE("cap_condition: idempotent and never decreases eigenvalues") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(6));
    Matrix b(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) b(i, j) = rng.normal();
    Matrix a = b * b.transposed();  // PSD, often ill-conditioned
    const Matrix once = math::cap_condition(a);
    const Matrix twice = math::cap_condition(once);
    CHECK(testutil::max_abs_diff(once, twice) < 1e-10);

    const auto before = math::sym_eigen(a).values;
    const auto after = math::sym_eigen(once).values;
    for (std::size_t i = 0; i < before.size(); ++i)
      CHECK(after[i] >= before[i] - 1e-10);

    const double cond = after.front() / after.back();
    CHECK(cond <= 100.0 * (1.0 + 1e-6));
  }
}

TEST_CASE("solve_psd: identity and diagonal") {
  const std::vector<double> b{3.0, -1.0};
  CHECK(math::solve_psd(Matrix::identity(2), b) == b);

  const std::vector<double> diag{2.0, 4.0};
  const std::vector<double> rhs{2.0, 8.0};
  const auto x = math::solve_psd(Matrix::diagonal(diag), rhs);
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(2.0));
}

TEST_CASE("solve_psd: recovers a known solution") {
  Rng rng(5);
  const Matrix a = random_spd(5, rng);
  std::vector<double> x_true(5);
  for (double& v : x_true) v = rng.normal();
  const std::vector<double> b = a * std::span<const double>(x_true);
  const auto x = math::solve_psd(a, b);
  double err = 0.0;
  for (int i = 0; i < 5; ++i) err = std::max(err, std::abs(x[i] - x_true[i]));
  CHECK(err < 1e-8);
}

TEST_CASE("log_det_psd: identity and diagonal") {
  CHECK(math::log_det_psd(Matrix::identity(4)) == doctest::Approx(0.0));
  const std::vector<double> diag{2.0, 3.0};
  CHECK(math::log_det_psd(Matrix::diagonal(diag)) == doctest::Approx(std::log(6.0)));
}

TEST_CASE("log_det_psd: matches the eigenvalue product") {
  Rng rng(11);
  const Matrix a = random_spd(4, rng);
  const auto eig = math::sym_eigen(a);
  double expected = 0.0;
  for (double v : eig.values) expected += std::log(v);
  CHECK(math::log_det_psd(a) == doctest::Approx(expected).epsilon(1e-8));
}
