#pragma once

#include <cstdint>

#include "dsca/linalg.hpp"
#include "dsca/subspace.hpp"

namespace dsca {

// Trainable intervention parameters for one concept: the subspace
// transformation (W, b) and the low-rank gate factors (U, V, gate_b).
struct DsamParams {
  int concept_id = -1;
  Mat W;        // rank x d_f
  Vec b;        // rank
  Mat gate_U;   // d_f x bottleneck
  Mat gate_V;   // bottleneck x d_f
  Vec gate_b;   // d_f
  int bottleneck = 0;

  void validate(int d_f) const;
};

// Fresh DSAM whose intervention is exactly zero: W copies the basis rows so
// the subspace residual vanishes, and the gate starts near 0.5 with small
// random factors.
DsamParams make_noop_params(const SubspaceBasis& basis, int bottleneck, uint64_t seed);

// Element-wise sigmoid of U (V h) + gate_b; every component in (0, 1).
Vec gate(const DsamParams& params, const Vec& h);

// Un-gated residual lifted back to the full space:
//   R^T ((W h + b) - R h)
// The result lies in the row space of the basis by construction.
Vec raw_update(const DsamParams& params, const SubspaceBasis& basis, const Vec& h);

// Gated intervention: gate(h) (element-wise) raw_update(h).
Vec intervene(const DsamParams& params, const SubspaceBasis& basis, const Vec& h);

// Subspace coordinates of the gated intervention, R * intervene(h).
Vec effective_subspace_coords(const DsamParams& params, const SubspaceBasis& basis,
                              const Vec& h);

} // namespace dsca
