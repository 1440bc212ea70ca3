#include "dsca/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dsca {

double dot(const Vec& x, const Vec& y) {
  require(x.size() == y.size(), "dot: dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

Vec add(const Vec& x, const Vec& y) {
  require(x.size() == y.size(), "add: dimension mismatch");
  Vec r(x.size());
  for (size_t i = 0; i < x.size(); ++i) r[i] = x[i] + y[i];
  return r;
}

Vec sub(const Vec& x, const Vec& y) {
  require(x.size() == y.size(), "sub: dimension mismatch");
  Vec r(x.size());
  for (size_t i = 0; i < x.size(); ++i) r[i] = x[i] - y[i];
  return r;
}

Vec scale(const Vec& x, double s) {
  Vec r(x.size());
  for (size_t i = 0; i < x.size(); ++i) r[i] = x[i] * s;
  return r;
}

void axpy(double s, const Vec& x, Vec& y) {
  require(x.size() == y.size(), "axpy: dimension mismatch");
  for (size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

bool all_finite(const Vec& x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

bool all_finite(const Mat& m) {
  for (double v : m.a)
    if (!std::isfinite(v)) return false;
  return true;
}

double cosine(const Vec& x, const Vec& y) {
  double nx = norm2(x), ny = norm2(y);
  require(nx > 0.0 && ny > 0.0, "cosine: zero-norm vector");
  return dot(x, y) / (nx * ny);
}

Vec matvec(const Mat& m, const Vec& x) {
  require(static_cast<int>(x.size()) == m.cols, "matvec: dimension mismatch");
  Vec r(m.rows, 0.0);
  for (int i = 0; i < m.rows; ++i) {
    const double* row = m.row(i);
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) s += row[j] * x[j];
    r[i] = s;
  }
  return r;
}

Vec matvec_t(const Mat& m, const Vec& x) {
  require(static_cast<int>(x.size()) == m.rows, "matvec_t: dimension mismatch");
  Vec r(m.cols, 0.0);
  for (int i = 0; i < m.rows; ++i) {
    const double* row = m.row(i);
    for (int j = 0; j < m.cols; ++j) r[j] += row[j] * x[i];
  }
  return r;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
  require(a.cols == b.cols, "matmul_nt: inner dimension mismatch");
  Mat r(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.rows; ++j) {
      const double* ra = a.row(i);
      const double* rb = b.row(j);
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += ra[k] * rb[k];
      r.at(i, j) = s;
    }
  }
  return r;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
  require(a.rows == b.rows, "matmul_tn: inner dimension mismatch");
  Mat r(a.cols, b.cols);
  for (int k = 0; k < a.rows; ++k) {
    const double* ra = a.row(k);
    const double* rb = b.row(k);
    for (int i = 0; i < a.cols; ++i) {
      double v = ra[i];
      if (v == 0.0) continue;
      double* out = r.row(i);
      for (int j = 0; j < b.cols; ++j) out[j] += v * rb[j];
    }
  }
  return r;
}

double frobenius_sq(const Mat& m) {
  double s = 0.0;
  for (double v : m.a) s += v * v;
  return s;
}

EigResult sym_eig(const Mat& s) {
  require(s.rows == s.cols, "sym_eig: matrix not square");
  const int n = s.rows;
  Mat a = s;
  Mat v(n, n);
  for (int i = 0; i < n; ++i) v.at(i, i) = 1.0;

  auto off_diag = [&]() {
    double sum = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) sum += a.at(p, q) * a.at(p, q);
    return sum;
  };

  double scale_ref = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) scale_ref += a.at(i, j) * a.at(i, j);
  const double stop = 1e-28 * std::max(scale_ref, 1e-300);

  const int max_sweeps = 60;
  for (int sweep = 0; sweep < max_sweeps && off_diag() > stop; ++sweep) {
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = a.at(p, q);
        if (apq == 0.0) continue;
        double app = a.at(p, p), aqq = a.at(q, q);
        double theta = (aqq - app) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double sn = t * c;

        for (int k = 0; k < n; ++k) {
          double akp = a.at(k, p), akq = a.at(k, q);
          a.at(k, p) = c * akp - sn * akq;
          a.at(k, q) = sn * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = a.at(p, k), aqk = a.at(q, k);
          a.at(p, k) = c * apk - sn * aqk;
          a.at(q, k) = sn * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - sn * vkq;
          v.at(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return a.at(i, i) > a.at(j, j); });

  EigResult res;
  res.values.resize(n);
  res.vectors = Mat(n, n);
  for (int i = 0; i < n; ++i) {
    res.values[i] = a.at(order[i], order[i]);
    for (int j = 0; j < n; ++j) res.vectors.at(i, j) = v.at(j, order[i]);
  }
  return res;
}

void orthonormalize_rows(Mat& m, double tol) {
  for (int pass = 0; pass < 2; ++pass) {
    for (int i = 0; i < m.rows; ++i) {
      double* ri = m.row(i);
      for (int j = 0; j < i; ++j) {
        const double* rj = m.row(j);
        double proj = 0.0;
        for (int k = 0; k < m.cols; ++k) proj += ri[k] * rj[k];
        for (int k = 0; k < m.cols; ++k) ri[k] -= proj * rj[k];
      }
      double nrm = 0.0;
      for (int k = 0; k < m.cols; ++k) nrm += ri[k] * ri[k];
      nrm = std::sqrt(nrm);
      if (pass == 0 && nrm < tol)
        throw std::runtime_error("orthonormalize_rows: rank-deficient input");
      for (int k = 0; k < m.cols; ++k) ri[k] /= nrm;
    }
  }
}

void canonical_row_signs(Mat& m) {
  for (int i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    int arg = 0;
    double best = std::abs(r[0]);
    for (int j = 1; j < m.cols; ++j) {
      if (std::abs(r[j]) > best) {
        best = std::abs(r[j]);
        arg = j;
      }
    }
    if (r[arg] < 0.0)
      for (int j = 0; j < m.cols; ++j) r[j] = -r[j];
  }
}

Vec singular_values(const Mat& m) {
  if (m.empty()) return {};
  // Gram matrix on the smaller side keeps the eigenproblem cheap.
  Mat gram = (m.rows <= m.cols) ? matmul_nt(m, m) : matmul_tn(m, m);
  EigResult e = sym_eig(gram);
  Vec sv(e.values.size());
  for (size_t i = 0; i < e.values.size(); ++i)
    sv[i] = std::sqrt(std::max(0.0, e.values[i]));
  return sv;
}

double max_principal_angle(const Mat& a, const Mat& b) {
  require(a.cols == b.cols, "max_principal_angle: ambient dimension mismatch");
  require(a.rows == b.rows, "max_principal_angle: rank mismatch");
  Mat m = matmul_nt(a, b);
  Vec sv = singular_values(m);
  double smin = sv.empty() ? 0.0 : sv.back();
  smin = std::clamp(smin, -1.0, 1.0);
  return std::acos(smin);
}

} // namespace dsca
