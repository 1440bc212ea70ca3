#include "dsca/subspace.hpp"

#include <algorithm>
#include <cmath>

namespace dsca {

namespace {

Vec mean_of(const std::vector<Vec>& xs) {
  Vec m(xs.front().size(), 0.0);
  for (const Vec& x : xs) axpy(1.0, x, m);
  for (double& v : m) v /= static_cast<double>(xs.size());
  return m;
}

// Top-r right singular pairs of a stack of row vectors, via the Gram matrix
// eigenproblem on the d x d side. Returns rows-of-V and singular values.
void top_right_singular(const Mat& data, int r, Mat& components, Vec& singvals) {
  const int d = data.cols;
  Mat gram = matmul_tn(data, data);  // d x d
  EigResult eig = sym_eig(gram);

  components = Mat(r, d);
  singvals.assign(r, 0.0);
  for (int i = 0; i < r; ++i) {
    singvals[i] = std::sqrt(std::max(0.0, eig.values[i]));
    for (int j = 0; j < d; ++j) components.at(i, j) = eig.vectors.at(i, j);
  }
  orthonormalize_rows(components);
  canonical_row_signs(components);
}

int numerical_rank(const Vec& eigvals) {
  if (eigvals.empty()) return 0;
  double top = std::max(eigvals[0], 0.0);
  double tol = std::max(1e-12 * top, 1e-300);
  int rank = 0;
  for (double v : eigvals)
    if (v > tol) ++rank;
  return rank;
}

} // namespace

SubspaceBasis pca_init(const std::vector<Vec>& buffer, int r, int concept_id) {
  if (r < 1) throw std::invalid_argument("pca_init: rank must be >= 1");
  if (buffer.empty()) throw rank_error("pca_init: empty buffer", 0);
  const int n = static_cast<int>(buffer.size());
  const int d = static_cast<int>(buffer.front().size());
  if (r > d) throw std::invalid_argument("pca_init: rank exceeds dimension");
  if (n < std::max(r, 2)) throw rank_error("pca_init: insufficient samples", 0);

  Vec mu = mean_of(buffer);
  Mat centered(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) centered.at(i, j) = buffer[i][j] - mu[j];

  Mat gram = matmul_tn(centered, centered);
  EigResult eig = sym_eig(gram);
  int achievable = numerical_rank(eig.values);
  if (achievable < r)
    throw rank_error("pca_init: covariance rank below requested rank", achievable);

  SubspaceBasis b;
  b.concept_id = concept_id;
  b.rank = r;
  b.rows = Mat(r, d);
  b.singular_values.assign(r, 0.0);
  for (int i = 0; i < r; ++i) {
    b.singular_values[i] = std::sqrt(std::max(0.0, eig.values[i]));
    for (int j = 0; j < d; ++j) b.rows.at(i, j) = eig.vectors.at(i, j);
  }
  orthonormalize_rows(b.rows);
  canonical_row_signs(b.rows);
  b.mean = std::move(mu);
  b.n_seen = n;
  b.version = 1;
  b.active = true;
  return b;
}

Vec residualize(const Vec& h, const std::vector<const SubspaceBasis*>& earlier) {
  Vec r = h;
  for (const SubspaceBasis* b : earlier) {
    if (!b || b->rank == 0) continue;
    Vec coords = matvec(b->rows, r);
    Vec back = matvec_t(b->rows, coords);
    for (size_t i = 0; i < r.size(); ++i) r[i] -= back[i];
  }
  return r;
}

Vec residualize(const Vec& h, const std::vector<SubspaceBasis>& earlier) {
  std::vector<const SubspaceBasis*> ptrs;
  ptrs.reserve(earlier.size());
  for (const SubspaceBasis& b : earlier) ptrs.push_back(&b);
  return residualize(h, ptrs);
}

SubspaceBasis ipca_refine(const SubspaceBasis& basis, const std::vector<Vec>& new_samples,
                          const std::vector<const SubspaceBasis*>& earlier) {
  if (!basis.active || basis.rank == 0)
    throw std::invalid_argument("ipca_refine: inactive basis");
  if (new_samples.empty()) return basis;  // no-op, version unchanged

  const int d = basis.dim();
  const int r = basis.rank;
  const int m = static_cast<int>(new_samples.size());

  std::vector<Vec> resid;
  resid.reserve(m);
  for (const Vec& x : new_samples) {
    require(static_cast<int>(x.size()) == d, "ipca_refine: dimension mismatch");
    resid.push_back(residualize(x, earlier));
  }

  // The retained state must live in the same residualized frame as the new
  // samples. Other concepts' bases move between refinements, so the carried
  // components and mean are projected into the current orthogonal complement
  // first; otherwise the mean-shift row drags this basis into spans that
  // activated after it did.
  Mat carried = basis.rows;
  Vec carried_mean = basis.mean;
  if (!earlier.empty()) {
    for (int i = 0; i < r; ++i) {
      Vec row(carried.row(i), carried.row(i) + d);
      Vec rr = residualize(row, earlier);
      for (int j = 0; j < d; ++j) carried.at(i, j) = rr[j];
    }
    orthonormalize_rows(carried);
    carried_mean = residualize(carried_mean, earlier);
  }

  Vec batch_mean = mean_of(resid);
  const double n_old = static_cast<double>(basis.n_seen);
  const double n_new = static_cast<double>(m);
  const double n_tot = n_old + n_new;

  Vec total_mean(d);
  for (int j = 0; j < d; ++j)
    total_mean[j] = (n_old * carried_mean[j] + n_new * batch_mean[j]) / n_tot;

  // Augmented stack: retained components weighted by their singular values,
  // the centered batch, and the mean-shift correction row.
  Mat stack(r + m + 1, d);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < d; ++j)
      stack.at(i, j) = basis.singular_values[i] * carried.at(i, j);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < d; ++j)
      stack.at(r + i, j) = resid[i][j] - batch_mean[j];
  double corr = std::sqrt(n_old * n_new / n_tot);
  for (int j = 0; j < d; ++j)
    stack.at(r + m, j) = corr * (carried_mean[j] - batch_mean[j]);

  SubspaceBasis out = basis;
  top_right_singular(stack, r, out.rows, out.singular_values);
  out.mean = std::move(total_mean);
  out.n_seen = basis.n_seen + m;
  out.version = basis.version + 1;
  return out;
}

double overlap(const SubspaceBasis& a, const SubspaceBasis& b) {
  require(a.dim() == b.dim(), "overlap: ambient dimension mismatch");
  Mat cross = matmul_nt(a.rows, b.rows);
  return frobenius_sq(cross);
}

OverlapReport mean_overlap(const std::vector<const SubspaceBasis*>& all) {
  const int k = static_cast<int>(all.size());
  if (k < 2) throw std::invalid_argument("mean_overlap: needs at least two bases");

  OverlapReport rep;
  rep.pairwise = Mat(k, k);
  double sum = 0.0, mx = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      double o = overlap(*all[i], *all[j]);
      rep.pairwise.at(i, j) = o;
      if (i != j) {
        sum += o;
        mx = std::max(mx, o);
      }
    }
  }
  rep.mean_overlap = sum / (static_cast<double>(k) * (k - 1));
  rep.max_overlap = mx;
  return rep;
}

OverlapReport mean_overlap(const std::vector<SubspaceBasis>& all) {
  std::vector<const SubspaceBasis*> ptrs;
  ptrs.reserve(all.size());
  for (const SubspaceBasis& b : all) ptrs.push_back(&b);
  return mean_overlap(ptrs);
}

double max_row_orthonormality_error(const SubspaceBasis& b) {
  Mat g = matmul_nt(b.rows, b.rows);
  double err = 0.0;
  for (int i = 0; i < g.rows; ++i)
    for (int j = 0; j < g.cols; ++j)
      err = std::max(err, std::abs(g.at(i, j) - (i == j ? 1.0 : 0.0)));
  return err;
}

} // namespace dsca
