#include "uaplab/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "uaplab/errors.hpp"

namespace uaplab::numeric {

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols, m.rows);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) t.at(c, r) = m.at(r, c);
  return t;
}

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double x : m.data) s += x * x;
  return std::sqrt(s);
}

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace {

uint64_t splitmix64(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) : origin_(seed) {
  uint64_t sm = seed;
  for (auto& s : s_) s = splitmix64(sm);
}

uint64_t Rng::next_u64() {
  // xoshiro256++
  const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::gaussian() {
  // Box-Muller; u1 is kept strictly positive so log stays finite.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Rng Rng::fork(uint64_t key) const {
  uint64_t mix = origin_ ^ (0x9E3779B97F4A7C15ULL * (key + 1));
  uint64_t sm = mix;
  return Rng(splitmix64(sm));
}

std::vector<double> sample_uniform(Rng& rng, double lo, double hi, int n) {
  std::vector<double> out(static_cast<size_t>(n));
  for (auto& x : out) x = rng.uniform(lo, hi);
  return out;
}

std::vector<double> sample_unit_sphere(Rng& rng, int d) {
  std::vector<double> v(static_cast<size_t>(d));
  double norm = 0.0;
  do {
    for (auto& x : v) x = rng.gaussian();
    norm = l2_norm(v);
  } while (norm == 0.0);
  for (auto& x : v) x /= norm;
  return v;
}

namespace {

// One-sided Jacobi: orthogonalize the r columns of a tall m x r matrix `a`
// by right rotations, accumulating them in `rot` (r x r).
void jacobi_orthogonalize(Matrix& a, Matrix& rot) {
  const int m = a.rows;
  const int r = a.cols;
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) rot.at(i, j) = (i == j) ? 1.0 : 0.0;

  const double tol = 1e-13;
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < r - 1; ++p) {
      for (int q = p + 1; q < r; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (int i = 0; i < m; ++i) {
          const double ap = a.at(i, p), aq = a.at(i, q);
          alpha += ap * ap;
          beta += aq * aq;
          gamma += ap * aq;
        }
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < m; ++i) {
          const double ap = a.at(i, p), aq = a.at(i, q);
          a.at(i, p) = c * ap - s * aq;
          a.at(i, q) = s * ap + c * aq;
        }
        for (int i = 0; i < r; ++i) {
          const double rp = rot.at(i, p), rq = rot.at(i, q);
          rot.at(i, p) = c * rp - s * rq;
          rot.at(i, q) = s * rp + c * rq;
        }
      }
    }
    if (!rotated) break;
  }
}

// Replace near-zero columns of w (m x r, indices given) by unit vectors
// orthogonal to all other columns, built from canonical basis candidates.
void complete_orthonormal(Matrix& w, const std::vector<int>& degenerate) {
  const int m = w.rows;
  const int r = w.cols;
  std::vector<bool> is_degenerate(static_cast<size_t>(r), false);
  for (int j : degenerate) is_degenerate[static_cast<size_t>(j)] = true;

  for (int j : degenerate) {
    for (int cand = 0; cand < m; ++cand) {
      std::vector<double> e(static_cast<size_t>(m), 0.0);
      e[static_cast<size_t>(cand)] = 1.0;
      // Remove components along every already-valid column.
      for (int c = 0; c < r; ++c) {
        if (c != j && is_degenerate[static_cast<size_t>(c)]) continue;
        if (c == j) continue;
        double proj = 0.0;
        for (int i = 0; i < m; ++i) proj += e[static_cast<size_t>(i)] * w.at(i, c);
        for (int i = 0; i < m; ++i) e[static_cast<size_t>(i)] -= proj * w.at(i, c);
      }
      const double norm = l2_norm(e);
      if (norm > 1e-8) {
        for (int i = 0; i < m; ++i) w.at(i, j) = e[static_cast<size_t>(i)] / norm;
        is_degenerate[static_cast<size_t>(j)] = false;
        break;
      }
    }
  }
}

}  // namespace

SvdResult thin_svd(const Matrix& m_in) {
  if (m_in.rows < 1 || m_in.cols < 1) throw InvalidConfig("thin_svd: empty matrix");
  for (double x : m_in.data)
    if (!std::isfinite(x)) throw NonFinite("thin_svd: non-finite entry");

  const bool wide = m_in.rows < m_in.cols;
  // Work on the tall orientation: a is (max dim) x r.
  Matrix a = wide ? transpose(m_in) : m_in;
  const int r = a.cols;

  Matrix rot(r, r);
  jacobi_orthogonalize(a, rot);

  std::vector<double> sigma(static_cast<size_t>(r), 0.0);
  for (int j = 0; j < r; ++j) {
    double s = 0.0;
    for (int i = 0; i < a.rows; ++i) s += a.at(i, j) * a.at(i, j);
    sigma[static_cast<size_t>(j)] = std::sqrt(s);
  }

  // Descending order, stable on ties.
  std::vector<int> order(static_cast<size_t>(r));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return sigma[static_cast<size_t>(x)] > sigma[static_cast<size_t>(y)];
  });

  Matrix w(a.rows, r);   // orthonormal columns spanning the column space of a
  Matrix rr(r, r);       // reordered rotations
  std::vector<double> sorted_sigma(static_cast<size_t>(r));
  const double sigma_max = sigma[static_cast<size_t>(order[0])];
  std::vector<int> degenerate;
  for (int j = 0; j < r; ++j) {
    const int src = order[static_cast<size_t>(j)];
    const double s = sigma[static_cast<size_t>(src)];
    sorted_sigma[static_cast<size_t>(j)] = s;
    if (s > sigma_max * 1e-300 && s > 0.0) {
      for (int i = 0; i < a.rows; ++i) w.at(i, j) = a.at(i, src) / s;
    } else {
      degenerate.push_back(j);
    }
    for (int i = 0; i < r; ++i) rr.at(i, j) = rot.at(i, src);
  }
  if (!degenerate.empty()) complete_orthonormal(w, degenerate);

  SvdResult out;
  out.sigma = std::move(sorted_sigma);
  if (wide) {
    // m = rr * diag(sigma) * w^T
    out.u = std::move(rr);
    out.v = std::move(w);
  } else {
    out.u = std::move(w);
    out.v = std::move(rr);
  }

  // Pin signs: first nonzero component of each V column positive.
  for (int j = 0; j < r; ++j) {
    double lead = 0.0;
    for (int i = 0; i < out.v.rows; ++i) {
      if (out.v.at(i, j) != 0.0) {
        lead = out.v.at(i, j);
        break;
      }
    }
    if (lead < 0.0) {
      for (int i = 0; i < out.v.rows; ++i) out.v.at(i, j) = -out.v.at(i, j);
      for (int i = 0; i < out.u.rows; ++i) out.u.at(i, j) = -out.u.at(i, j);
    }
  }
  return out;
}

Matrix normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (int r = 0; r < m.rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < m.cols; ++c) s += m.at(r, c) * m.at(r, c);
    const double norm = std::sqrt(s);
    if (norm == 0.0) throw ZeroRow("normalize_rows: zero row " + std::to_string(r));
    for (int c = 0; c < m.cols; ++c) out.at(r, c) = m.at(r, c) / norm;
  }
  return out;
}

namespace {

struct LinearSolve {
  double rho = 0.0;
  double omega = 0.0;
  double sse = std::numeric_limits<double>::infinity();
};

// Closed-form least squares for (rho, omega) at fixed lambda.
LinearSolve solve_rho_omega(const std::vector<double>& x, const std::vector<double>& y, double lambda) {
  const size_t n = x.size();
  double see = 0.0, se = 0.0, sey = 0.0, sy = 0.0;
  std::vector<double> e(n);
  for (size_t i = 0; i < n; ++i) {
    e[i] = std::exp(-x[i] * lambda);
    see += e[i] * e[i];
    se += e[i];
    sey += e[i] * y[i];
    sy += y[i];
  }
  const double nn = static_cast<double>(n);
  const double det = see * nn - se * se;
  LinearSolve out;
  if (std::abs(det) < 1e-30 * std::max(1.0, see * nn)) {
    out.rho = 0.0;
    out.omega = sy / nn;
  } else {
    out.rho = (sey * nn - se * sy) / det;
    out.omega = (see * sy - se * sey) / det;
  }
  double sse = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double resid = out.rho * e[i] + out.omega - y[i];
    sse += resid * resid;
  }
  out.sse = sse;
  return out;
}

}  // namespace

ExpFit fit_exp_decay(const std::vector<double>& values) {
  const size_t n = values.size();
  if (n < 3) throw InvalidConfig("fit_exp_decay: need at least 3 values");
  double vmin = values[0], vmax = values[0];
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFinite("fit_exp_decay: non-finite value");
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  if (vmax == vmin) throw DegenerateSeries("fit_exp_decay: constant series");

  std::vector<double> x(n), y(n);
  for (size_t i = 0; i < n; ++i) {
    x[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    y[i] = (values[i] - vmin) / (vmax - vmin);
  }

  double best_lambda = 1.0;
  LinearSolve best;
  const int grid_points = 64;
  const double lo = 1e-3, hi = 1e3;
  for (int g = 0; g < grid_points; ++g) {
    const double lambda = lo * std::pow(hi / lo, static_cast<double>(g) / (grid_points - 1));
    const LinearSolve cand = solve_rho_omega(x, y, lambda);
    if (cand.sse < best.sse) {
      best = cand;
      best_lambda = lambda;
    }
  }

  // Gauss-Newton on lambda alone, re-solving (rho, omega) after each step.
  // The raw step is tried at several expansions and contractions because the
  // fixed-(rho, omega) curvature badly over-damps nearly-linear series.
  double lambda = best_lambda;
  for (int it = 0; it < 120; ++it) {
    const LinearSolve cur = solve_rho_omega(x, y, lambda);
    double jr = 0.0, jj = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double e = std::exp(-x[i] * lambda);
      const double resid = cur.rho * e + cur.omega - y[i];
      const double jac = -cur.rho * x[i] * e;
      jr += jac * resid;
      jj += jac * jac;
    }
    if (jj < 1e-30) break;
    const double raw = -jr / jj;
    bool improved = false;
    double mult = 16.0;
    for (int ls = 0; ls < 20; ++ls, mult *= 0.5) {
      const double cand_lambda = std::clamp(lambda + mult * raw, 1e-6, 1e4);
      const LinearSolve cand = solve_rho_omega(x, y, cand_lambda);
      if (cand.sse < best.sse) {
        best = cand;
        best_lambda = cand_lambda;
        lambda = cand_lambda;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }

  ExpFit fit;
  fit.rho = best.rho;
  fit.lambda = best_lambda;
  fit.omega = best.omega;
  fit.rmse = std::sqrt(best.sse / static_cast<double>(n));
  return fit;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const int workers = std::min(std::max(threads, 1), n);
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const int begin = static_cast<int>(static_cast<int64_t>(n) * w / workers);
    const int end = static_cast<int>(static_cast<int64_t>(n) * (w + 1) / workers);
    pool.emplace_back([begin, end, &fn] {
      for (int i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace uaplab::numeric
