#pragma once

#include <vector>

#include "dsca/backbone.hpp"
#include "dsca/engine.hpp"

namespace dsca {

// Synthetic analog of the editing evaluation sets: edit cases with their
// targets, per-case perturbation neighbors, and unrelated probes drawn from
// concepts the edits never touch.
struct EditEvalSet {
  struct Case {
    Sample sample;
    int target = 0;
    std::vector<Sample> text_neighbors;    // N(p): perturbed text, re-fused
    std::vector<Sample> visual_neighbors;  // N(v): perturbed visual, re-fused
  };
  std::vector<Case> edit_cases;
  std::vector<Sample> unrelated_text;        // evaluated with no visual input
  std::vector<Sample> unrelated_multimodal;  // U(v,p)
};

struct EvalSetParams {
  int neighbors_per_case = 4;
  int unrelated_count = 200;
  // Perturbation magnitude; defaults to 0.5 * world.noise_scale when <= 0.
  double perturb_scale = -1.0;
  uint64_t seed = 99;
};

// Builds neighbors and unrelated probes for the given edit cases. Unrelated
// samples come from the replay half of the concept space.
EditEvalSet build_eval_set(const WorldModel& world,
                           const std::vector<Sample>& edit_cases,
                           const EvalSetParams& params);

// Fraction of edit cases whose edited representation lands on the target
// class under the frozen head.
double reliability(const Engine& engine, const std::vector<EditEvalSet::Case>& cases);

enum class NeighborKind { text, visual };
double generalization(const Engine& engine,
                      const std::vector<EditEvalSet::Case>& cases, NeighborKind kind);

enum class LocalityKind { text, multimodal };
// Fraction of unrelated inputs whose argmax matches the baseline engine's.
// Text locality zeroes the visual pathway on both sides.
double locality(const Engine& edited, const Engine& baseline,
                const std::vector<Sample>& unrelated, LocalityKind kind);

struct AccuracyMatrix {
  Mat a;          // T x T, a(t,i) = accuracy on task i after training task t
  Vec zero_shot;  // a-bar, pre-training accuracy per task
};

struct ContinualMetrics {
  double acc = 0.0;
  double bwt = 0.0;
  double fwt = 0.0;
  double a_t = 0.0;
};

ContinualMetrics cl_metrics(const AccuracyMatrix& m);

struct SparsityReport {
  std::vector<double> bin_edges;   // 0, 0.05, ..., 1.0
  std::vector<long> counts;        // one per bin
  double fraction_below_005 = 0.0;
  double mean_active = 0.0;        // weights > 0.05 per decision
  long total_weights = 0;
};

// Histogram over full routing-weight vectors: every concept absent from a
// decision's candidate set counts as an exact zero.
SparsityReport sparsity_report(const std::vector<RoutingDecision>& decisions);

} // namespace dsca
