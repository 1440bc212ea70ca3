#pragma once

#include <stdexcept>
#include <vector>

#include "dsca/linalg.hpp"

namespace dsca {

// Row-orthonormal semantic basis plus the running state incremental PCA
// needs across refinements (mean, retained singular values, sample count).
struct SubspaceBasis {
  int concept_id = -1;
  Mat rows;          // rank x d_f
  int rank = 0;
  long version = 0;
  bool active = false;

  Vec mean;          // mean of the (residualized) features seen so far
  Vec singular_values;
  long n_seen = 0;

  int dim() const { return rows.cols; }
};

struct OverlapReport {
  Mat pairwise;        // K x K of ||R_i R_j^T||_F^2; diagonal equals rank
  double mean_overlap = 0.0;
  double max_overlap = 0.0;  // epsilon in the interference bound
};

// Thrown when the buffer cannot support the requested rank; carries the rank
// that was achievable so the caller can decide to wait for more samples.
class rank_error : public std::runtime_error {
 public:
  rank_error(const std::string& msg, int achievable)
      : std::runtime_error(msg), achievable_rank(achievable) {}
  int achievable_rank;
};

// Batch PCA of the centered buffer; rows are the top-r principal directions
// with the canonical sign convention. Throws rank_error on degeneracy.
SubspaceBasis pca_init(const std::vector<Vec>& buffer, int r, int concept_id = -1);

// h minus its projections onto every earlier basis.
Vec residualize(const Vec& h, const std::vector<const SubspaceBasis*>& earlier);
Vec residualize(const Vec& h, const std::vector<SubspaceBasis>& earlier);

// One incremental PCA step: residualize the new samples against `earlier`,
// then fold them into the basis via the augmented-SVD update. Rank is
// preserved; version increments. Empty input is a no-op.
SubspaceBasis ipca_refine(const SubspaceBasis& basis, const std::vector<Vec>& new_samples,
                          const std::vector<const SubspaceBasis*>& earlier);

// ||R_a R_b^T||_F^2
double overlap(const SubspaceBasis& a, const SubspaceBasis& b);

OverlapReport mean_overlap(const std::vector<const SubspaceBasis*>& all);
OverlapReport mean_overlap(const std::vector<SubspaceBasis>& all);

double max_row_orthonormality_error(const SubspaceBasis& b);

} // namespace dsca
