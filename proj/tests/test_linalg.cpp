#include "doctest.h"

#include <random>

#include "dsca/linalg.hpp"
#include "oracles.hpp"

using namespace dsca;

TEST_CASE("matvec against double-loop oracle") {
  std::mt19937_64 rng(1);
  Mat m(7, 5);
  for (double& v : m.a) v = oracle::random_vec(1, rng)[0];
  Vec x = oracle::random_vec(5, rng);
  Vec got = matvec(m, x);
  Vec want = oracle::naive_matvec(m, x);
  for (int i = 0; i < 7; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));
}

TEST_CASE("matvec_t is the transpose product") {
  std::mt19937_64 rng(2);
  Mat m(6, 4);
  for (double& v : m.a) v = oracle::random_vec(1, rng)[0];
  Vec x = oracle::random_vec(6, rng);
  Vec got = matvec_t(m, x);
  for (int j = 0; j < 4; ++j) {
    double want = 0.0;
    for (int i = 0; i < 6; ++i) want += m.at(i, j) * x[i];
    CHECK(got[j] == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("jacobi eigendecomposition matches power iteration on random PSD") {
  std::mt19937_64 rng(3);
  const int n = 12;
  Mat x(30, n);
  for (double& v : x.a) v = oracle::random_vec(1, rng)[0];
  Mat s = matmul_tn(x, x);

  EigResult eig = sym_eig(s);
  Vec pv;
  Mat pvec;
  oracle::power_eig(s, 4, pv, pvec);

  for (int k = 0; k < 4; ++k) {
    CHECK(eig.values[k] == doctest::Approx(pv[k]).epsilon(1e-9));
    // Same direction up to sign.
    double ip = 0.0;
    for (int j = 0; j < n; ++j) ip += eig.vectors.at(k, j) * pvec.at(k, j);
    CHECK(std::abs(ip) == doctest::Approx(1.0).epsilon(1e-7));
  }

  SUBCASE("eigenvalues descend and reconstruct the matrix") {
    for (size_t i = 1; i < eig.values.size(); ++i)
      CHECK(eig.values[i] <= eig.values[i - 1] + 1e-9);
    // S = V^T diag(lambda) V with rows of `vectors` as eigenvectors.
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double r = 0.0;
        for (int k = 0; k < n; ++k)
          r += eig.values[k] * eig.vectors.at(k, i) * eig.vectors.at(k, j);
        CHECK(r == doctest::Approx(s.at(i, j)).epsilon(1e-8));
      }
  }
}

TEST_CASE("orthonormalize_rows produces orthonormal rows") {
  std::mt19937_64 rng(4);
  Mat m(5, 9);
  for (double& v : m.a) v = oracle::random_vec(1, rng)[0];
  orthonormalize_rows(m);
  Mat g = matmul_nt(m, m);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      CHECK(g.at(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
}

TEST_CASE("orthonormalize_rows rejects rank-deficient input") {
  Mat m(2, 3);
  m.at(0, 0) = 1.0;
  m.at(1, 0) = 2.0;  // second row is a multiple of the first
  CHECK_THROWS_AS(orthonormalize_rows(m), std::runtime_error);
}

TEST_CASE("canonical_row_signs flips rows with negative peak entry") {
  Mat m(2, 3);
  m.at(0, 0) = 0.2;
  m.at(0, 1) = -0.9;
  m.at(1, 2) = 0.5;
  canonical_row_signs(m);
  CHECK(m.at(0, 1) == doctest::Approx(0.9));
  CHECK(m.at(0, 0) == doctest::Approx(-0.2));
  CHECK(m.at(1, 2) == doctest::Approx(0.5));
}

TEST_CASE("max_principal_angle matches projector-norm oracle") {
  std::mt19937_64 rng(5);
  Mat a = oracle::random_orthonormal(3, 10, rng);
  Mat b = oracle::random_orthonormal(3, 10, rng);
  double got = max_principal_angle(a, b);
  double want = oracle::principal_angle_projectors(a, b);
  CHECK(got == doctest::Approx(want).epsilon(1e-6));

  SUBCASE("identical subspaces have zero angle") {
    CHECK(max_principal_angle(a, a) < 1e-7);
  }
}

TEST_CASE("cosine throws on zero vector") {
  Vec z(4, 0.0), x(4, 1.0);
  CHECK_THROWS_AS(cosine(z, x), std::invalid_argument);
}
