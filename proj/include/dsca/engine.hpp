#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsca/backbone.hpp"
#include "dsca/losses.hpp"
#include "dsca/partitioner.hpp"
#include "dsca/router.hpp"

namespace dsca {

struct EngineConfig {
  int r = 8;
  int bottleneck = 8;
  int n_min = 12;
  int n_refine = 50;
  double alpha = 2.0;
  double ema_rate = 0.05;
  int buffer_capacity = 512;
  double init_std = 0.0;  // 0 = automatic (median inter-prototype rule)
  double tau = 0.07;
  double tau_visual = 0.3;
  LossWeights loss_weights;
  double lr = 1e-2;
  double momentum = 0.9;
  int batch_edit = 1;
  int batch_replay = 8;
  int inner_steps = 20;
  // Stop an edit's inner loop early once its own task loss falls below this;
  // 0 disables and always runs inner_steps.
  double inner_tol = 0.0;

  // Component toggles exercised by the ablation variants.
  bool orthogonalize = true;     // residualize PCA against other subspaces
  bool single_stage = false;     // skip the coarse visual filter
  bool basis_residual = true;    // subtract R h inside the raw update

  void validate() const;  // throws config_error
  PartitionerConfig partitioner() const;
  RouterConfig router() const;
  ForwardOptions forward_options() const;
};

// Published hyperparameter profile; kept verbatim even though n_min < r
// defers activation until enough samples accumulate (activation_threshold).
EngineConfig paper_profile_engine();

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::ordered_json engine_config_to_json(const EngineConfig& c);
EngineConfig engine_config_from_json(const nlohmann::json& j);

// Counts every mutation path so the dual-mode update discipline is checkable:
// prototypes move only in assignment, bases only in refinement, DSAM
// trainables only in the gradient step.
struct MutationAudit {
  long proto_updates = 0;
  long spawns = 0;
  long basis_inits = 0;
  long basis_refines = 0;
  long grad_steps = 0;
};

struct EngineState {
  std::vector<Concept> concepts;
  std::map<int, SubspaceBasis> bases;
  std::map<int, DsamParams> dsams;
  long step = 0;
  EngineConfig config;
};

struct TimeseriesRow {
  long step = 0;
  double task = 0, align = 0, cdistill = 0, sparse = 0, total = 0;
  double mean_overlap = 0, max_overlap = 0;
  int k = 0;
  double active_dsams_mean = 0;
};

struct RunReport {
  std::vector<TimeseriesRow> timeseries;
  std::vector<nlohmann::ordered_json> checkpoints;
  nlohmann::ordered_json final_record;
  bool completed = false;
};

class Engine {
 public:
  Engine(EngineConfig cfg, WorldModel world, uint64_t seed);

  // One pass of the training loop: concept/buffer updates on the edit batch
  // (optional so a sequential protocol can present a sample once), routing
  // and intervention on both batches, loss, and a single parameter update.
  // A failure leaves the state exactly as it was.
  LossBreakdown train_step(const std::vector<Sample>& edit_batch,
                           const std::vector<Sample>& replay_batch,
                           bool update_concepts = true);

  // Periodic structural update: refine active bases with buffered samples,
  // activate inactive concepts whose buffers are ready, clear processed
  // buffers. PCA degeneracy leaves a concept inactive with its buffer.
  void refine_subspaces();

  // Pure inference on the frozen state.
  struct Inference {
    Vec edited;
    RoutingDecision decision;
  };
  Inference edit_inference(const Sample& s) const;

  struct RunHooks {
    int checkpoint_count = 5;
    // Called at checkpoints with the number of edits applied so far.
    std::function<nlohmann::ordered_json(const Engine&, int)> evaluate;
  };

  // Sequential editing protocol over a pre-generated stream. Fills `report`
  // incrementally so partial results survive a thrown error.
  void run_lifelong(const std::vector<Sample>& stream,
                    const std::vector<Sample>& replay_pool, int edits_total,
                    const RunHooks& hooks, RunReport& report);

  const EngineState& state() const { return state_; }
  const WorldModel& world() const { return world_; }
  const TaskHead& head() const { return head_; }
  const MutationAudit& audit() const { return audit_; }
  uint64_t seed() const { return seed_; }

  int active_dsam_count() const;
  // Mean/max pairwise overlap of the active bases; zeros when fewer than two.
  std::pair<double, double> current_overlap() const;
  // Buffers a concept must reach before activation; PCA needs rank+1 samples
  // even when n_min is configured lower (paper profile).
  int activation_threshold() const;

  std::vector<std::string> warnings() const { return warnings_; }

 private:
  friend Engine load_checkpoint(const std::string& dir);

  void assign_edit_batch(const std::vector<Sample>& edit_batch);
  std::vector<const SubspaceBasis*> other_active_bases(int self_id) const;

  EngineState state_;
  WorldModel world_;
  TaskHead head_;
  SgdOptimizer optimizer_;
  MutationAudit audit_;
  uint64_t seed_;
  std::mt19937_64 run_rng_;
  mutable bool overlap_dirty_ = true;
  mutable std::pair<double, double> overlap_cache_{0.0, 0.0};
  std::vector<std::string> warnings_;
};

// Known ablation variants; throws config_error listing valid ids on an
// unknown one. "full" returns the config unchanged.
EngineConfig apply_variant(const EngineConfig& base, const std::string& variant);
std::vector<std::string> known_variants();

void save_checkpoint(const Engine& engine, const std::string& dir);
Engine load_checkpoint(const std::string& dir);

} // namespace dsca
