#include "doctest.h"

#include <cmath>
#include <random>

#include "dsca/dsam.hpp"
#include "oracles.hpp"

using namespace dsca;

namespace {

SubspaceBasis make_basis(int id, Mat rows) {
  SubspaceBasis b;
  b.concept_id = id;
  b.rank = rows.rows;
  b.rows = std::move(rows);
  b.mean.assign(b.rows.cols, 0.0);
  b.singular_values.assign(b.rank, 1.0);
  b.n_seen = 10;
  b.version = 1;
  b.active = true;
  return b;
}

DsamParams random_params(const SubspaceBasis& basis, int bottleneck,
                         std::mt19937_64& rng, double sd = 0.5) {
  std::normal_distribution<double> g(0.0, sd);
  DsamParams p;
  p.concept_id = basis.concept_id;
  p.bottleneck = bottleneck;
  p.W = Mat(basis.rank, basis.dim());
  for (double& v : p.W.a) v = g(rng);
  p.b.resize(basis.rank);
  for (double& v : p.b) v = g(rng);
  p.gate_U = Mat(basis.dim(), bottleneck);
  for (double& v : p.gate_U.a) v = g(rng);
  p.gate_V = Mat(bottleneck, basis.dim());
  for (double& v : p.gate_V.a) v = g(rng);
  p.gate_b.resize(basis.dim());
  for (double& v : p.gate_b) v = g(rng);
  return p;
}

} // namespace

TEST_CASE("gate sigmoid endpoints") {
  std::mt19937_64 rng(101);
  SubspaceBasis basis = make_basis(0, oracle::random_orthonormal(3, 16, rng));
  DsamParams p = random_params(basis, 4, rng);
  Vec h = oracle::random_vec(16, rng);

  SUBCASE("zero pre-activation gives 0.5 everywhere") {
    for (double& v : p.gate_U.a) v = 0.0;
    p.gate_b.assign(16, 0.0);
    Vec g = gate(p, h);
    for (double v : g) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
  }

  SUBCASE("large positive bias saturates toward one") {
    for (double& v : p.gate_U.a) v = 0.0;
    p.gate_b.assign(16, 50.0);
    Vec g = gate(p, h);
    for (double v : g) CHECK(1.0 - v <= 1e-20);
  }

  SUBCASE("outputs stay strictly inside (0,1)") {
    Vec g = gate(p, h);
    for (double v : g) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }

  SUBCASE("non-finite input throws") {
    h[3] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(gate(p, h), std::invalid_argument);
  }
}

TEST_CASE("gate matches the dense-matrix oracle") {
  std::mt19937_64 rng(103);
  SubspaceBasis basis = make_basis(0, oracle::random_orthonormal(4, 12, rng));
  DsamParams p = random_params(basis, 3, rng);
  Vec h = oracle::random_vec(12, rng);
  Vec got = gate(p, h);

  // Dense oracle: materialize W_g = U V explicitly.
  for (int i = 0; i < 12; ++i) {
    double pre = p.gate_b[i];
    for (int j = 0; j < 12; ++j) {
      double wg = 0.0;
      for (int k = 0; k < 3; ++k) wg += p.gate_U.at(i, k) * p.gate_V.at(k, j);
      pre += wg * h[j];
    }
    double want = 1.0 / (1.0 + std::exp(-pre));
    CHECK(got[i] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("raw_update special cases") {
  std::mt19937_64 rng(107);
  SubspaceBasis basis = make_basis(2, oracle::random_orthonormal(3, 10, rng));

  SUBCASE("W equal to the basis rows gives a zero update") {
    DsamParams p = random_params(basis, 2, rng);
    p.W = basis.rows;
    p.b.assign(3, 0.0);
    Vec h = oracle::random_vec(10, rng);
    Vec u = raw_update(p, basis, h);
    CHECK(norm2(u) < 1e-12);
  }

  SUBCASE("zero input with a unit bias lifts the first basis row") {
    DsamParams p = random_params(basis, 2, rng);
    p.b.assign(3, 0.0);
    p.b[0] = 1.0;
    Vec h(10, 0.0);
    Vec u = raw_update(p, basis, h);
    for (int j = 0; j < 10; ++j)
      CHECK(u[j] == doctest::Approx(basis.rows.at(0, j)).epsilon(1e-14));
  }

  SUBCASE("inactive basis throws") {
    SubspaceBasis dead = basis;
    dead.active = false;
    DsamParams p = random_params(basis, 2, rng);
    CHECK_THROWS_AS(raw_update(p, dead, Vec(10, 0.0)), std::invalid_argument);
  }

  SUBCASE("concept id mismatch throws") {
    DsamParams p = random_params(basis, 2, rng);
    p.concept_id = 9;
    CHECK_THROWS_AS(raw_update(p, basis, Vec(10, 0.0)), std::invalid_argument);
  }
}

TEST_CASE("raw_update matches the four-step composition oracle") {
  std::mt19937_64 rng(109);
  SubspaceBasis basis = make_basis(1, oracle::random_orthonormal(4, 14, rng));
  DsamParams p = random_params(basis, 3, rng);
  Vec h = oracle::random_vec(14, rng);
  Vec got = raw_update(p, basis, h);

  // Oracle: project, transform, subtract, lift with naive loops.
  Vec wh = oracle::naive_matvec(p.W, h);
  Vec rh = oracle::naive_matvec(basis.rows, h);
  Vec a(4);
  for (int i = 0; i < 4; ++i) a[i] = wh[i] + p.b[i] - rh[i];
  Vec want(14, 0.0);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 14; ++j) want[j] += basis.rows.at(i, j) * a[i];
  for (int j = 0; j < 14; ++j) CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-12));

  SUBCASE("update is confined to the basis row space") {
    Vec resid = residualize(got, std::vector<const SubspaceBasis*>{&basis});
    CHECK(norm2(resid) <= 1e-10 * (norm2(got) + 1e-30));
  }
}

TEST_CASE("intervene gating behavior") {
  std::mt19937_64 rng(113);
  SubspaceBasis basis = make_basis(0, oracle::random_orthonormal(3, 12, rng));
  DsamParams p = random_params(basis, 3, rng);
  Vec h = oracle::random_vec(12, rng);

  SUBCASE("closed gate annihilates the update") {
    DsamParams q = p;
    for (double& v : q.gate_U.a) v = 0.0;
    q.gate_b.assign(12, -50.0);
    Vec psi = intervene(q, basis, h);
    Vec raw = raw_update(q, basis, h);
    CHECK(norm2(psi) <= 1e-18 * norm2(raw));
  }

  SUBCASE("uniform half gate halves the raw update") {
    DsamParams q = p;
    for (double& v : q.gate_U.a) v = 0.0;
    q.gate_b.assign(12, 0.0);
    Vec psi = intervene(q, basis, h);
    Vec raw = raw_update(q, basis, h);
    for (int j = 0; j < 12; ++j)
      CHECK(psi[j] == doctest::Approx(0.5 * raw[j]).epsilon(1e-15));
  }

  SUBCASE("random case matches the element-wise product oracle") {
    Vec psi = intervene(p, basis, h);
    Vec g = gate(p, h);
    Vec raw = raw_update(p, basis, h);
    for (int j = 0; j < 12; ++j)
      CHECK(std::abs(psi[j] - g[j] * raw[j]) <= 1e-12);
  }
}

TEST_CASE("effective_subspace_coords") {
  std::mt19937_64 rng(127);
  SubspaceBasis basis = make_basis(0, oracle::random_orthonormal(4, 12, rng));
  DsamParams p = random_params(basis, 3, rng);
  Vec h = oracle::random_vec(12, rng);

  SUBCASE("closed gate gives zero coordinates") {
    DsamParams q = p;
    for (double& v : q.gate_U.a) v = 0.0;
    q.gate_b.assign(12, -50.0);
    Vec c = effective_subspace_coords(q, basis, h);
    for (double v : c) CHECK(std::abs(v) < 1e-18);
  }

  SUBCASE("uniform gate scales the subspace residual") {
    DsamParams q = p;
    for (double& v : q.gate_U.a) v = 0.0;
    q.gate_b.assign(12, 0.0);  // gate = 0.5 exactly
    Vec c = effective_subspace_coords(q, basis, h);
    Vec raw = raw_update(q, basis, h);
    Vec raw_coords = matvec(basis.rows, raw);
    for (int i = 0; i < 4; ++i)
      CHECK(c[i] == doctest::Approx(0.5 * raw_coords[i]).epsilon(1e-12));
  }

  SUBCASE("random case matches the direct projection oracle") {
    Vec c = effective_subspace_coords(p, basis, h);
    Vec psi = intervene(p, basis, h);
    Vec want = oracle::naive_matvec(basis.rows, psi);
    for (int i = 0; i < 4; ++i) CHECK(c[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("non-interference of raw updates across orthogonal bases") {
  std::mt19937_64 rng(131);
  const int d = 20;
  Mat big = oracle::random_orthonormal(8, d, rng);
  Mat rows_a(4, d), rows_b(4, d);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < d; ++j) {
      rows_a.at(i, j) = big.at(i, j);
      rows_b.at(i, j) = big.at(i + 4, j);
    }
  SubspaceBasis a = make_basis(0, rows_a);
  SubspaceBasis b = make_basis(1, rows_b);
  DsamParams pb = random_params(b, 5, rng);

  for (int trial = 0; trial < 50; ++trial) {
    Vec h = oracle::random_vec(d, rng);
    Vec update_b = raw_update(pb, b, h);
    // Projection onto the other concept's subspace vanishes.
    Vec coords = matvec(a.rows, update_b);
    Vec proj = matvec_t(a.rows, coords);
    CHECK(norm2(proj) <= 1e-10 * (norm2(update_b) + 1e-30));
  }
}

TEST_CASE("make_noop_params yields an exact no-op intervention") {
  std::mt19937_64 rng(137);
  SubspaceBasis basis = make_basis(3, oracle::random_orthonormal(4, 16, rng));
  DsamParams p = make_noop_params(basis, 4, 99);
  for (int trial = 0; trial < 20; ++trial) {
    Vec h = oracle::random_vec(16, rng);
    Vec raw = raw_update(p, basis, h);
    CHECK(norm2(raw) < 1e-12);
    Vec psi = intervene(p, basis, h);
    CHECK(norm2(psi) < 1e-12);
  }
  SUBCASE("same seed reproduces the gate factors") {
    DsamParams q = make_noop_params(basis, 4, 99);
    CHECK(q.gate_U.a == p.gate_U.a);
    CHECK(q.gate_V.a == p.gate_V.a);
  }
  SUBCASE("bottleneck bound is enforced") {
    CHECK_THROWS_AS(make_noop_params(basis, 8, 1), std::invalid_argument);
  }
}
