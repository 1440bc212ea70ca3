#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsca/losses.hpp"

namespace dsca {

// Self-contained randomized state for finite-difference verification:
// concepts with prototypes at the batch samples, random orthonormal bases,
// random (non-noop) DSAM parameters, and mixed edit/replay batches.
struct GradcheckState {
  std::vector<Concept> concepts;
  std::map<int, SubspaceBasis> bases;
  std::map<int, DsamParams> dsams;
  TaskHead head;
  std::vector<Sample> edit_batch;
  std::vector<Sample> replay_batch;
  LossWeights weights;
  ForwardOptions options;
};

GradcheckState make_gradcheck_state(uint64_t seed);

struct GradcheckReport {
  struct TensorResult {
    int concept_id = -1;
    std::string tensor;
    double worst_rel_err = 0.0;
    size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
  };
  std::vector<TensorResult> tensors;
  double worst_rel_err = 0.0;
  bool pass = false;
};

// Central differences (step 1e-5) against the analytic backward pass on
// `coords_per_tensor` randomly sampled coordinates of every trainable
// tensor. Pass threshold is 1e-4 relative. `corrupt` perturbs one analytic
// gradient entry first (negative-control hook).
GradcheckReport run_gradcheck(const GradcheckState& state, int coords_per_tensor,
                              uint64_t seed, bool corrupt = false);

// Convenience: `num_states` random states, all must pass.
GradcheckReport run_gradcheck_suite(int num_states, uint64_t seed,
                                    bool corrupt = false);

} // namespace dsca
