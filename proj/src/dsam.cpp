#include "dsca/dsam.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace dsca {

void DsamParams::validate(int d_f) const {
  require(W.cols == d_f && static_cast<int>(gate_b.size()) == d_f,
          "dsam: dimension mismatch");
  require(W.rows == static_cast<int>(b.size()), "dsam: W/b rank mismatch");
  require(gate_U.rows == d_f && gate_U.cols == bottleneck, "dsam: gate_U shape");
  require(gate_V.rows == bottleneck && gate_V.cols == d_f, "dsam: gate_V shape");
  require(bottleneck >= 1 && 4 * bottleneck <= d_f,
          "dsam: bottleneck must satisfy 1 <= b <= d_f/4");
  require(all_finite(W) && all_finite(gate_U) && all_finite(gate_V) &&
              all_finite(b) && all_finite(gate_b),
          "dsam: non-finite parameter");
}

DsamParams make_noop_params(const SubspaceBasis& basis, int bottleneck, uint64_t seed) {
  const int d = basis.dim();
  DsamParams p;
  p.concept_id = basis.concept_id;
  p.bottleneck = bottleneck;
  p.W = basis.rows;  // residual (W h + b) - R h starts at zero
  p.b.assign(basis.rank, 0.0);
  p.gate_U = Mat(d, bottleneck);
  p.gate_V = Mat(bottleneck, d);
  p.gate_b.assign(d, 0.0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.01 / std::sqrt(static_cast<double>(d)));
  for (double& v : p.gate_U.a) v = g(rng);
  for (double& v : p.gate_V.a) v = g(rng);
  p.validate(d);
  return p;
}

Vec gate(const DsamParams& params, const Vec& h) {
  require(static_cast<int>(h.size()) == params.W.cols, "gate: dimension mismatch");
  require(all_finite(h), "gate: non-finite input");
  Vec vh = matvec(params.gate_V, h);
  Vec pre = matvec(params.gate_U, vh);
  Vec out(h.size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = 1.0 / (1.0 + std::exp(-(pre[i] + params.gate_b[i])));
  return out;
}

Vec raw_update(const DsamParams& params, const SubspaceBasis& basis, const Vec& h) {
  if (!basis.active) throw std::invalid_argument("raw_update: inactive basis");
  require(params.concept_id == basis.concept_id, "raw_update: concept id mismatch");
  require(params.W.rows == basis.rank, "raw_update: rank mismatch");
  require(static_cast<int>(h.size()) == basis.dim(), "raw_update: dimension mismatch");

  Vec target = matvec(params.W, h);
  axpy(1.0, params.b, target);
  Vec current = matvec(basis.rows, h);
  for (int i = 0; i < basis.rank; ++i) target[i] -= current[i];
  return matvec_t(basis.rows, target);
}

Vec intervene(const DsamParams& params, const SubspaceBasis& basis, const Vec& h) {
  Vec g = gate(params, h);
  Vec raw = raw_update(params, basis, h);
  for (size_t i = 0; i < raw.size(); ++i) raw[i] *= g[i];
  return raw;
}

Vec effective_subspace_coords(const DsamParams& params, const SubspaceBasis& basis,
                              const Vec& h) {
  return matvec(basis.rows, intervene(params, basis, h));
}

} // namespace dsca
