#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsca {

using Vec = std::vector<double>;

// Dense row-major matrix. Small enough at desk scale that we keep the
// storage flat and the operations scalar; every loop has a fixed order so
// results are bit-reproducible run to run.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  double* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }

  bool empty() const { return rows == 0 || cols == 0; }
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

double dot(const Vec& x, const Vec& y);
double norm2(const Vec& x);
Vec add(const Vec& x, const Vec& y);
Vec sub(const Vec& x, const Vec& y);
Vec scale(const Vec& x, double s);
// y += s * x
void axpy(double s, const Vec& x, Vec& y);
bool all_finite(const Vec& x);
bool all_finite(const Mat& m);
double cosine(const Vec& x, const Vec& y);  // throws on zero norm

Vec matvec(const Mat& m, const Vec& x);          // m * x
Vec matvec_t(const Mat& m, const Vec& x);        // m^T * x
Mat matmul_nt(const Mat& a, const Mat& b);       // a * b^T
Mat matmul_tn(const Mat& a, const Mat& b);       // a^T * b

double frobenius_sq(const Mat& m);

struct EigResult {
  Vec values;  // descending
  Mat vectors; // row i is the eigenvector for values[i]
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Deterministic,
// accurate to machine precision for the sizes used here (d <= a few hundred).
EigResult sym_eig(const Mat& s);

// Modified Gram-Schmidt on rows, two passes. Rows must be linearly
// independent; throws if a row collapses below tol * its input norm.
void orthonormalize_rows(Mat& m, double tol = 1e-12);

// Fix each row's sign so its largest-magnitude entry is positive
// (first such entry on ties).
void canonical_row_signs(Mat& m);

// Singular values of a (rows x cols) matrix, descending, via the Gram
// matrix on the smaller side.
Vec singular_values(const Mat& m);

// Largest principal angle (radians) between the row spaces of two bases
// with orthonormal rows and equal rank.
double max_principal_angle(const Mat& a, const Mat& b);

} // namespace dsca
