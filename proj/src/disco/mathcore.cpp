#include "disco/mathcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace disco::math {

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
  Matrix m(static_cast<int>(values.size()), static_cast<int>(values.size()));
  for (int i = 0; i < m.rows(); ++i) m(i, i) = values[i];
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), ErrorCode::DimensionMismatch, "matrix product shapes");
  Matrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::DimensionMismatch,
          "matrix sum shapes");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::DimensionMismatch,
          "matrix difference shapes");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& v : c.data()) v *= s;
  return c;
}

std::vector<double> operator*(const Matrix& a, std::span<const double> x) {
  require(a.cols() == static_cast<int>(x.size()), ErrorCode::DimensionMismatch,
          "matrix-vector shapes");
  std::vector<double> y(a.rows(), 0.0);
  for (int i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (int j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
    y[i] = acc;
  }
  return y;
}

void check_symmetric(const Matrix& a, double tol) {
  require(a.square(), ErrorCode::DimensionMismatch, "expected a square matrix");
  require(a.all_finite(), ErrorCode::InvalidArgument, "matrix has non-finite entries");
  for (int i = 0; i < a.rows(); ++i)
    for (int j = i + 1; j < a.cols(); ++j)
      require(std::abs(a(i, j) - a(j, i)) <= tol, ErrorCode::InvalidArgument,
              "matrix is not symmetric within tolerance");
}

Matrix symmetrized(const Matrix& a) {
  Matrix s = a;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = i + 1; j < a.cols(); ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      s(i, j) = v;
      s(j, i) = v;
    }
  return s;
}

namespace {

// Plain lower Cholesky; returns false on a non-positive pivot.
bool try_cholesky(const Matrix& a, Matrix& lower) {
  const int n = a.rows();
  lower = Matrix(n, n);
  for (int j = 0; j < n; ++j) {
    double sum_sq = 0.0;
    for (int k = 0; k < j; ++k) sum_sq += lower(j, k) * lower(j, k);
    const double pivot = a(j, j) - sum_sq;
    if (pivot <= 0.0 || !std::isfinite(pivot)) return false;
    lower(j, j) = std::sqrt(pivot);
    for (int i = j + 1; i < n; ++i) {
      double sum = 0.0;
      for (int k = 0; k < j; ++k) sum += lower(i, k) * lower(j, k);
      lower(i, j) = (a(i, j) - sum) / lower(j, j);
    }
  }
  return true;
}

}  // namespace

Matrix cholesky(const Matrix& a, const MathConfig& cfg) {
  check_symmetric(a, cfg.symmetry_tol);
  Matrix lower;
  if (try_cholesky(a, lower)) return lower;
  for (double jitter : cfg.jitter_ladder) {
    Matrix jittered = a;
    for (int i = 0; i < a.rows(); ++i) jittered(i, i) += jitter;
    if (try_cholesky(jittered, lower)) return lower;
  }
  throw Error(ErrorCode::NotPositiveDefinite,
              "Cholesky failed after the full jitter ladder");
}

std::vector<double> cholesky_solve(const Matrix& lower, std::span<const double> b) {
  const int n = lower.rows();
  require(static_cast<int>(b.size()) == n, ErrorCode::DimensionMismatch,
          "rhs length does not match factor");
  std::vector<double> y(n), x(n);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int k = 0; k < i; ++k) sum += lower(i, k) * y[k];
    y[i] = (b[i] - sum) / lower(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double sum = 0.0;
    for (int k = i + 1; k < n; ++k) sum += lower(k, i) * x[k];
    x[i] = (y[i] - sum) / lower(i, i);
  }
  return x;
}

EigenDecomposition sym_eigen(const Matrix& a, const MathConfig& cfg) {
  check_symmetric(a, cfg.symmetry_tol);
  const int n = a.rows();
  Matrix work = symmetrized(a);
  Matrix vectors = Matrix::identity(n);

  auto off_norm = [&]() {
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) sum += work(i, j) * work(i, j);
    return std::sqrt(2.0 * sum);
  };

  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) scale += work(i, j) * work(i, j);
  scale = std::sqrt(scale);
  const double stop = cfg.jacobi_off_tol * std::max(scale, 1.0);

  int sweep = 0;
  while (off_norm() > stop) {
    require(sweep < cfg.max_jacobi_sweeps, ErrorCode::NoConvergence,
            "Jacobi sweeps exceeded the iteration cap");
    ++sweep;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = work(p, q);
        if (apq == 0.0) continue;
        const double app = work(p, p);
        const double aqq = work(q, q);
        const double theta = 0.5 * (aqq - app) / apq;
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double wkp = work(k, p);
          const double wkq = work(k, q);
          work(k, p) = c * wkp - s * wkq;
          work(k, q) = s * wkp + c * wkq;
        }
        for (int k = 0; k < n; ++k) {
          const double wpk = work(p, k);
          const double wqk = work(q, k);
          work(p, k) = c * wpk - s * wqk;
          work(q, k) = s * wpk + c * wqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = vectors(k, p);
          const double vkq = vectors(k, q);
          vectors(k, p) = c * vkp - s * vkq;
          vectors(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return work(i, i) > work(j, j); });

  EigenDecomposition out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (int j = 0; j < n; ++j) {
    out.values[j] = work(order[j], order[j]);
    for (int i = 0; i < n; ++i) out.vectors(i, j) = vectors(i, order[j]);
  }
  return out;
}

Matrix cap_condition(const Matrix& sigma, double kappa_max, const MathConfig& cfg) {
  require(kappa_max > 1.0, ErrorCode::InvalidArgument, "kappa_max must exceed 1");
  const EigenDecomposition eig = sym_eigen(sigma, cfg);
  const double lambda_max = std::max(eig.values.front(), 0.0);
  const double lambda_min = std::max(eig.values.back(), 0.0);

  if (lambda_max <= 0.0) return cfg.zero_matrix_floor * Matrix::identity(sigma.rows());

  double shift = 0.0;
  if (lambda_max > kappa_max * lambda_min) {
    shift = (lambda_max - kappa_max * lambda_min) / (kappa_max - 1.0);
    // Snap numerically-negligible shifts to zero so repeated application is
    // entrywise stable.
    if (shift <= 1e-12 * lambda_max) shift = 0.0;
  }

  Matrix out = symmetrized(sigma);
  for (int i = 0; i < out.rows(); ++i) out(i, i) += shift;
  return out;
}

std::vector<double> solve_psd(const Matrix& a, std::span<const double> b,
                              const MathConfig& cfg) {
  return cholesky_solve(cholesky(a, cfg), b);
}

Matrix solve_psd_matrix(const Matrix& a, const Matrix& b, const MathConfig& cfg) {
  require(a.rows() == b.rows(), ErrorCode::DimensionMismatch, "solve shapes");
  const Matrix lower = cholesky(a, cfg);
  Matrix x(b.rows(), b.cols());
  std::vector<double> column(b.rows());
  for (int j = 0; j < b.cols(); ++j) {
    for (int i = 0; i < b.rows(); ++i) column[i] = b(i, j);
    const std::vector<double> solved = cholesky_solve(lower, column);
    for (int i = 0; i < b.rows(); ++i) x(i, j) = solved[i];
  }
  return x;
}

Matrix inverse_psd(const Matrix& a, const MathConfig& cfg) {
  return solve_psd_matrix(a, Matrix::identity(a.rows()), cfg);
}

double log_det_psd(const Matrix& a, const MathConfig& cfg) {
  const Matrix lower = cholesky(a, cfg);
  double sum = 0.0;
  for (int i = 0; i < lower.rows(); ++i) sum += std::log(lower(i, i));
  return 2.0 * sum;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorCode::DimensionMismatch, "dot shapes");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

std::vector<double> sub(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorCode::DimensionMismatch, "vector difference shapes");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

std::vector<double> add(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorCode::DimensionMismatch, "vector sum shapes");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

}  // namespace disco::math
