#ifndef UAPLAB_NUMERIC_HPP
#define UAPLAB_NUMERIC_HPP

#include <cstdint>
#include <functional>
#include <vector>

namespace uaplab::numeric {

/// Dense row-major matrix of doubles. Deliberately minimal: the kernels in
/// this project are bespoke loops, not general linear algebra.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
  double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  size_t size() const { return data.size(); }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

Matrix transpose(const Matrix& m);
double frobenius_norm(const Matrix& m);

double l2_norm(const std::vector<double>& v);
double dot(const std::vector<double>& a, const std::vector<double>& b);

/// Deterministic, splittable random stream. The core generator is
/// xoshiro256++ seeded through splitmix64; fork() derives an independent
/// stream from the origin seed and a key, without consuming parent state.
/// Uniform doubles are pure bit manipulation and therefore produce identical
/// values on every conforming platform.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  /// Uniform in [0,1).
  double uniform01();
  /// Uniform in [lo,hi).
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller (consumes two uniforms).
  double gaussian();

  /// Independent child stream. fork(k) is a pure function of (origin seed, k).
  Rng fork(uint64_t key) const;

  uint64_t origin() const { return origin_; }

 private:
  uint64_t origin_;
  uint64_t s_[4];
};

std::vector<double> sample_uniform(Rng& rng, double lo, double hi, int n);
/// Uniform direction on the unit sphere in R^d (normalized Gaussian vector).
std::vector<double> sample_unit_sphere(Rng& rng, int d);

/// Thin singular value decomposition M = U * diag(sigma) * V^T with
/// r = min(rows, cols). Computed by one-sided Jacobi on the smaller side.
/// Sign convention: the first nonzero component of every V column is
/// positive, so singular vectors are reproducible artifacts.
struct SvdResult {
  Matrix u;                   // rows x r
  std::vector<double> sigma;  // r values, descending, >= 0
  Matrix v;                   // cols x r
};

SvdResult thin_svd(const Matrix& m);

/// Scales every row to unit Euclidean length. Throws ZeroRow.
Matrix normalize_rows(const Matrix& m);

/// Least-squares fit of y = rho * exp(-x * lambda) + omega to a descending
/// series. Both axes are affinely rescaled to [0,1] before fitting; the
/// returned parameters live in those scaled coordinates. A coarse log-spaced
/// lambda grid is refined by Gauss-Newton with rho/omega solved in closed
/// form at each candidate lambda.
struct ExpFit {
  double rho = 0.0;
  double lambda = 0.0;
  double omega = 0.0;
  double rmse = 0.0;
};

ExpFit fit_exp_decay(const std::vector<double>& values);

/// Runs fn(0..n-1) over `threads` workers with block partitioning. Each index
/// must touch only its own outputs; results are then independent of the
/// schedule. threads <= 1 runs inline.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace uaplab::numeric

#endif  // UAPLAB_NUMERIC_HPP
