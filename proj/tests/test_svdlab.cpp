#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "micro_fixture.hpp"
#include "uaplab/errors.hpp"
#include "uaplab/svdlab.hpp"

using namespace uaplab;
using attacks::Domain;
using numeric::Matrix;
using svdlab::MatrixKind;

TEST_CASE("build_matrix: random waveform rows are unit and reproducible") {
  const auto& world = microfix::micro_world();
  const auto m1 = svdlab::build_matrix(world.train, world.net, MatrixKind::RandomR,
                                       Domain::Waveform, 50, 2);
  const auto m2 = svdlab::build_matrix(world.train, world.net, MatrixKind::RandomR,
                                       Domain::Waveform, 50, 1);
  CHECK(m1.rows.data == m2.rows.data);
  CHECK(m1.rows.rows == static_cast<int>(world.train.size()));
  CHECK(m1.rows.cols == 256);
  for (int r = 0; r < m1.rows.rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < m1.rows.cols; ++c) s += m1.rows.at(r, c) * m1.rows.at(r, c);
    CHECK(std::abs(std::sqrt(s) - 1.0) < 1e-9);
  }

  const auto m3 = svdlab::build_matrix(world.train, world.net, MatrixKind::RandomR,
                                       Domain::Waveform, 51, 2);
  CHECK(m1.rows.data != m3.rows.data);
}

TEST_CASE("build_matrix: feature rows depend on their anchors") {
  const auto& world = microfix::micro_world();
  const auto m = svdlab::build_matrix(world.train, world.net, MatrixKind::RandomR, Domain::Mfcc,
                                      50, 2);
  CHECK(m.rows.cols == world.net.pipeline().cfg().feature_dim(signal::Repr::Mfcc));
  CHECK(m.anchors.size() == static_cast<size_t>(m.rows.rows));
}

TEST_CASE("build_matrix: uniform feature noise has no anchors") {
  const auto& world = microfix::micro_world();
  const auto m = svdlab::build_matrix(world.train, world.net, MatrixKind::UniformFeature,
                                      Domain::Mfcc, 52, 2);
  CHECK(m.anchors.empty());
  CHECK(m.rows.rows == static_cast<int>(world.train.size()));
  CHECK_THROWS_AS(svdlab::build_matrix(world.train, world.net, MatrixKind::UniformFeature,
                                       Domain::Waveform, 52, 1),
                  InvalidConfig);
}

TEST_CASE("build_matrix: deepfool rows are unit-normalized perturbation directions") {
  const auto& world = microfix::micro_world();
  const auto m = svdlab::build_matrix(world.train, world.net, MatrixKind::DeepFoolV,
                                      Domain::Waveform, 53, 2);
  CHECK(m.rows.rows + m.skipped == static_cast<int>(world.train.size()));
  CHECK(m.rows.rows > 0);
  for (int r = 0; r < std::min(m.rows.rows, 10); ++r) {
    double s = 0.0;
    for (int c = 0; c < m.rows.cols; ++c) s += m.rows.at(r, c) * m.rows.at(r, c);
    CHECK(std::abs(std::sqrt(s) - 1.0) < 1e-9);
  }
}

TEST_CASE("decay_of: duplicated rows produce a single dominant singular value") {
  numeric::Rng rng(11);
  const auto row = numeric::sample_uniform(rng, -1.0, 1.0, 48);
  Matrix m(20, 48);
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 48; ++c) m.at(r, c) = row[static_cast<size_t>(c)];
  svdlab::PerturbationMatrix pm;
  pm.rows = numeric::normalize_rows(m);
  const auto entry = svdlab::decay_of(pm, "dup");
  CHECK(entry.sigma[0] > 1e-8);
  CHECK(entry.sigma[1] < 1e-10 * entry.sigma[0]);
  // near-instant decay fits a large decay factor
  CHECK(entry.fit.lambda > 100.0);
}

TEST_CASE("decay_of: correlated rows decay faster than iid rows") {
  numeric::Rng rng(12);
  const int n = 40, d = 60;
  Matrix iid(n, d);
  for (auto& x : iid.data) x = rng.uniform(-1.0, 1.0);

  // rows concentrated on a 3-dimensional subspace plus small noise
  Matrix low(n, d);
  std::vector<std::vector<double>> basis;
  for (int b = 0; b < 3; ++b) basis.push_back(numeric::sample_uniform(rng, -1.0, 1.0, d));
  for (int r = 0; r < n; ++r)
    for (int b = 0; b < 3; ++b) {
      const double coef = rng.uniform(-1.0, 1.0);
      for (int c = 0; c < d; ++c) low.at(r, c) += coef * basis[static_cast<size_t>(b)][static_cast<size_t>(c)];
    }
  for (auto& x : low.data) x += 0.01 * rng.uniform(-1.0, 1.0);

  svdlab::PerturbationMatrix a, b;
  a.rows = numeric::normalize_rows(iid);
  b.rows = numeric::normalize_rows(low);
  const auto fit_iid = svdlab::decay_of(a, "iid");
  const auto fit_low = svdlab::decay_of(b, "low");
  CHECK(fit_low.fit.lambda > fit_iid.fit.lambda);
}

TEST_CASE("subspace_sweep: zero scale never fools; samples stay in the span") {
  const auto& world = microfix::micro_world();
  const auto m = svdlab::build_matrix(world.train, world.net, MatrixKind::DeepFoolV, Domain::Mfcc,
                                      53, 2);
  const auto svd = numeric::thin_svd(m.rows);

  const auto res = svdlab::subspace_sweep(world.net, world.test, svd.v, {3, 5}, {0.0, 4.0}, 3,
                                          999, 2);
  CHECK(res.cells.size() == 4);
  for (const auto& cell : res.cells) {
    if (cell.scale == 0.0) CHECK(cell.mean_fr == 0.0);
    CHECK(cell.mean_fr >= 0.0);
    CHECK(cell.mean_fr <= 1.0);
    CHECK(cell.trials == 3);
  }

  // span membership: residual of V_n V_n^T u - u for a sampled direction
  const int n_sub = 5;
  numeric::Rng rng(1000);
  const auto coef = numeric::sample_unit_sphere(rng, n_sub);
  const int d = svd.v.rows;
  std::vector<double> u(static_cast<size_t>(d), 0.0);
  for (int j = 0; j < n_sub; ++j)
    for (int t = 0; t < d; ++t) u[static_cast<size_t>(t)] += coef[static_cast<size_t>(j)] * svd.v.at(t, j);
  std::vector<double> proj(static_cast<size_t>(d), 0.0);
  for (int j = 0; j < n_sub; ++j) {
    double c = 0.0;
    for (int t = 0; t < d; ++t) c += u[static_cast<size_t>(t)] * svd.v.at(t, j);
    for (int t = 0; t < d; ++t) proj[static_cast<size_t>(t)] += c * svd.v.at(t, j);
  }
  double resid = 0.0;
  for (int t = 0; t < d; ++t) resid += (proj[static_cast<size_t>(t)] - u[static_cast<size_t>(t)]) *
                                       (proj[static_cast<size_t>(t)] - u[static_cast<size_t>(t)]);
  CHECK(std::sqrt(resid) <= 1e-9);

  // determinism across thread counts
  const auto res2 = svdlab::subspace_sweep(world.net, world.test, svd.v, {3, 5}, {0.0, 4.0}, 3,
                                           999, 1);
  for (size_t i = 0; i < res.cells.size(); ++i) CHECK(res.cells[i].mean_fr == res2.cells[i].mean_fr);
}

TEST_CASE("singular_vector_eval: frequencies partition the misclassified mass") {
  const auto& world = microfix::micro_world();
  const auto m = svdlab::build_matrix(world.train, world.net, MatrixKind::DeepFoolV, Domain::Mfcc,
                                      53, 2);
  const auto svd = numeric::thin_svd(m.rows);
  const auto ev = svdlab::singular_vector_eval(world.net, world.test, svd.v, 6, {-4.0, 4.0},
                                               std::nullopt, 2);
  CHECK(ev.rows.size() == 12);
  CHECK(ev.dom1 != ev.dom2);
  for (const auto& row : ev.rows) {
    if (row.misclassified > 0) {
      CHECK(row.freq_dom1 + row.freq_dom2 + row.freq_others == doctest::Approx(1.0).epsilon(1e-9));
      // integer reconciliation: freq * count must be integral
      const double d1 = row.freq_dom1 * row.misclassified;
      CHECK(std::abs(d1 - std::lround(d1)) < 1e-9);
    } else {
      CHECK(row.freq_dom1 == 0.0);
      CHECK(row.freq_dom2 == 0.0);
      CHECK(row.freq_others == 0.0);
    }
    CHECK(row.fr == doctest::Approx(static_cast<double>(row.misclassified) / world.test.size()));
  }

  // pinning the pair is honored
  const auto pinned = svdlab::singular_vector_eval(world.net, world.test, svd.v, 3, {4.0},
                                                   std::make_pair(1, 2), 1);
  CHECK(pinned.dom1 == 1);
  CHECK(pinned.dom2 == 2);
}

TEST_CASE("singular_vector_eval: negating the scale negates the perturbation") {
  const auto& world = microfix::micro_world();
  const auto m = svdlab::build_matrix(world.train, world.net, MatrixKind::RandomR, Domain::Mfcc,
                                      54, 2);
  const auto svd = numeric::thin_svd(m.rows);
  // the +s and -s evaluations use exactly opposite feature deltas, so they
  // are both present in the rows with the same index
  const auto ev = svdlab::singular_vector_eval(world.net, world.test, svd.v, 2, {-5.0, 5.0},
                                               std::nullopt, 1);
  REQUIRE(ev.rows.size() == 4);
  CHECK(ev.rows[0].index == ev.rows[1].index);
  CHECK(ev.rows[0].scale == -ev.rows[1].scale);
}

TEST_CASE("volume_probe: histogram sums and determinism") {
  const auto& world = microfix::micro_world();
  const auto h1 = svdlab::volume_probe(world.net, 500, 31, 2);
  const auto h2 = svdlab::volume_probe(world.net, 500, 31, 1);
  CHECK(h1 == h2);
  long long total = 0;
  for (long long c : h1) total += c;
  CHECK(total == 500);
  const auto h3 = svdlab::volume_probe(world.net, 500, 32, 2);
  CHECK(h1 != h3);
}
