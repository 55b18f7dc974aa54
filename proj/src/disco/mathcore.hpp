#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "disco/common.hpp"

namespace disco::math {

// Dense row-major matrix for the small symmetric problems in this project
// (goal-distribution covariances, at most a few dozen rows).
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    require(rows >= 0 && cols >= 0, ErrorCode::InvalidArgument, "negative matrix shape");
  }

  static Matrix identity(int n);
  static Matrix diagonal(std::span<const double> values);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * cols_ + j];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool square() const { return rows_ == cols_; }
  Matrix transposed() const;

  double max_abs() const;
  bool all_finite() const;

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
std::vector<double> operator*(const Matrix& a, std::span<const double> x);

// Tolerances and retry knobs used across the module. Exposed so callers can
// tighten or loosen them; defaults match the rest of the project.
struct MathConfig {
  double symmetry_tol = 1e-9;
  // Retry ladder for Cholesky on nearly-singular PSD input. MLE covariances
  // of near-duplicate example states are rank-deficient by construction, so
  // a plain factorization attempt is followed by jittered ones.
  std::array<double, 3> jitter_ladder{1e-10, 1e-8, 1e-6};
  int max_jacobi_sweeps = 64;
  double jacobi_off_tol = 1e-14;
  // cap_condition maps the all-zero matrix to this multiple of the identity.
  double zero_matrix_floor = 1e-6;
};

struct EigenDecomposition {
  std::vector<double> values;  // descending
  Matrix vectors;              // eigenvector i in column i
};

// Lower-triangular L with L*L^T = a (possibly after diagonal jitter).
// Throws NotPositiveDefinite when every jitter level fails.
Matrix cholesky(const Matrix& a, const MathConfig& cfg = {});

// Cyclic Jacobi eigendecomposition of a symmetric matrix.
EigenDecomposition sym_eigen(const Matrix& a, const MathConfig& cfg = {});

// Smallest c >= 0 with cond(sigma + c*I) <= kappa_max. The zero matrix maps
// to zero_matrix_floor * I so downstream inversions stay defined.
Matrix cap_condition(const Matrix& sigma, double kappa_max = 100.0,
                     const MathConfig& cfg = {});

std::vector<double> solve_psd(const Matrix& a, std::span<const double> b,
                              const MathConfig& cfg = {});

// Columns of the result solve a * X = b for each column of b.
Matrix solve_psd_matrix(const Matrix& a, const Matrix& b, const MathConfig& cfg = {});

Matrix inverse_psd(const Matrix& a, const MathConfig& cfg = {});

double log_det_psd(const Matrix& a, const MathConfig& cfg = {});

// Forward/back substitution against a precomputed Cholesky factor.
std::vector<double> cholesky_solve(const Matrix& lower, std::span<const double> b);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
double norm(std::span<const double> a);
std::vector<double> sub(std::span<const double> a, std::span<const double> b);
std::vector<double> add(std::span<const double> a, std::span<const double> b);

void check_symmetric(const Matrix& a, double tol);
Matrix symmetrized(const Matrix& a);

}  // namespace disco::math
