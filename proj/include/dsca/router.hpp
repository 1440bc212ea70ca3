#pragma once

#include <map>
#include <vector>

#include "dsca/dsam.hpp"
#include "dsca/partitioner.hpp"
#include "dsca/subspace.hpp"

namespace dsca {

struct RouterConfig {
  double tau_visual = 0.3;
  double tau = 0.07;

  void validate() const;
};

// Outcome of the two routing stages for one input. Maps hold entries for
// coarse-filter candidates only; every absent id reads as exactly zero.
struct RoutingDecision {
  std::vector<int> candidates;     // ascending ids from the coarse filter
  std::map<int, double> scores;    // s_k, fused cosine per candidate
  std::map<int, double> logits;    // s_k / tau for routed (active) candidates
  std::map<int, double> weights;   // softmax over routed candidates
  int k_total = 0;                 // number of concepts at decision time

  double weight(int id) const;
  double logit(int id) const;
  double weight_sum() const;
};

// Stage 1: ids whose visual-prototype cosine strictly exceeds tau_visual.
std::vector<int> coarse_filter(const Vec& h_v, const std::vector<Concept>& concepts,
                               const RouterConfig& cfg);

// Stage 2: temperature softmax over fused-prototype cosines, restricted to
// candidates whose DSAM is active; inactive candidates keep zero weight and
// zero logit. Empty candidate set means the identity edit.
RoutingDecision route(const Vec& h_f, const std::vector<int>& candidates,
                      const std::vector<Concept>& concepts, const RouterConfig& cfg);

// h_f plus the weight-scaled sum of interventions from active candidates.
// Returns the input bit-for-bit when nothing contributes.
Vec apply_edit(const Vec& h_f, const RoutingDecision& decision,
               const std::map<int, DsamParams>& dsams,
               const std::map<int, SubspaceBasis>& bases);

// One JSON object per decision, for the sparsity diagnostics log.
std::string decisions_to_jsonl(const std::vector<RoutingDecision>& decisions);

} // namespace dsca
