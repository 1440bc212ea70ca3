#pragma once

#include <map>
#include <string>
#include <vector>

#include "dsca/backbone.hpp"
#include "dsca/dsam.hpp"
#include "dsca/partitioner.hpp"
#include "dsca/router.hpp"
#include "dsca/subspace.hpp"

namespace dsca {

struct LossWeights {
  double lambda_align = 0.5;
  double lambda_distill = 1.0;
  double lambda_sparse = 1e-2;
  double tau_distill = 0.07;
  // Alternate forms, off by default: align h_v + delta instead of the edited
  // fused vector; penalize |z_k| instead of |w_k|.
  bool align_visual_form = false;
  bool sparse_on_logits = false;

  void validate() const;
};

struct LossBreakdown {
  double task = 0.0;
  double align = 0.0;
  double cdistill = 0.0;
  double sparse = 0.0;
  double total = 0.0;
};

// Variant toggles that change the forward computation itself.
struct ForwardOptions {
  RouterConfig router;
  bool single_stage = false;    // skip the coarse visual filter
  bool basis_residual = true;   // subtract R h inside the raw update
};

// ---------------------------------------------------------------------------
// Individual loss terms
// ---------------------------------------------------------------------------

double loss_task(const Vec& edited, int target_class, const TaskHead& head);
double loss_align(const Vec& edited, const Vec& text);
double loss_cdistill(const std::vector<Vec>& edited_batch,
                     const std::vector<Vec>& teacher_batch, double tau);
double loss_sparse(const std::vector<RoutingDecision>& decisions,
                   bool on_logits = false);

// ---------------------------------------------------------------------------
// Forward pass with recording, analytic backward, SGD
// ---------------------------------------------------------------------------

struct CandidateCache {
  int id = -1;
  double weight = 0.0;
  Vec gate_values;   // g = sigmoid(U V h + gate_b)
  Vec lifted;        // R^T a, the un-gated update
  Vec bottleneck_in; // V h
};

struct SampleCache {
  Vec h_f;
  Vec visual;
  Vec text;
  int target_class = 0;
  RoutingDecision decision;
  std::vector<CandidateCache> contribs;
  Vec edited;
};

struct ForwardTrace {
  std::vector<SampleCache> edit;
  std::vector<SampleCache> replay;
  std::vector<Vec> teachers;  // frozen fused vectors of the replay batch
};

// Routes one input and applies the weighted gated interventions, recording
// everything backward() needs.
SampleCache forward_sample(const Sample& s, const std::vector<Concept>& concepts,
                           const std::map<int, SubspaceBasis>& bases,
                           const std::map<int, DsamParams>& dsams,
                           const ForwardOptions& opt);

// Task and align over the edit batch, distillation and sparsity over the
// replay batch against the frozen teacher. Fills `trace` when non-null.
LossBreakdown total_loss(const std::vector<Sample>& edit_batch,
                         const std::vector<Sample>& replay_batch,
                         const std::vector<Concept>& concepts,
                         const std::map<int, SubspaceBasis>& bases,
                         const std::map<int, DsamParams>& dsams,
                         const TaskHead& head, const LossWeights& weights,
                         const ForwardOptions& opt, ForwardTrace* trace = nullptr);

struct DsamGrads {
  Mat W;
  Vec b;
  Mat gate_U;
  Mat gate_V;
  Vec gate_b;
};

DsamGrads zero_grads_like(const DsamParams& p);

// Analytic gradients for every DSAM that contributed to the recorded forward
// pass. Routing weights, prototypes, bases, and the head are constants.
std::map<int, DsamGrads> backward(const ForwardTrace& trace,
                                  const std::map<int, SubspaceBasis>& bases,
                                  const std::map<int, DsamParams>& dsams,
                                  const TaskHead& head, const LossWeights& weights);

// params - lr * grads. Throws on non-finite gradients with a diagnostic.
DsamParams sgd_step(const DsamParams& params, const DsamGrads& grads, double lr);

class SgdOptimizer {
 public:
  SgdOptimizer(double lr, double momentum) : lr_(lr), momentum_(momentum) {}
  void step(std::map<int, DsamParams>& params, const std::map<int, DsamGrads>& grads);
  double lr() const { return lr_; }

 private:
  double lr_;
  double momentum_;
  std::map<int, DsamGrads> velocity_;
};

} // namespace dsca
