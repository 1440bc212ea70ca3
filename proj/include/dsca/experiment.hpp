#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dsca/config.hpp"
#include "dsca/engine.hpp"
#include "dsca/metrics.hpp"

namespace dsca {

// Everything a run needs, generated deterministically from the config: the
// world, the sequential edit stream (ordered by task when tasks > 1), the
// fixed replay pool, and the evaluation sets.
struct ExperimentData {
  WorldModel world;
  std::vector<Sample> edit_stream;
  std::vector<Sample> replay_pool;
  EditEvalSet eval;
  std::vector<std::vector<int>> task_case_indices;  // eval case ids per task
};

ExperimentData make_experiment_data(const ExperimentConfig& cfg);

struct ExperimentResult {
  RunReport report;
  // Final metrics
  double reliability = 0.0;
  double t_gen = 0.0, v_gen = 0.0;
  double t_loc = 0.0, m_loc = 0.0;
  double mean_overlap = 0.0, max_overlap = 0.0;
  int concepts = 0, active_dsams = 0;
  // Task-sequence outputs when run.tasks > 1
  std::optional<AccuracyMatrix> accuracy_matrix;
  std::optional<ContinualMetrics> continual;
  SparsityReport replay_sparsity;
  std::string variant = "full";
};

// Runs the sequential protocol for cfg.run.variant, evaluating metrics at
// every checkpoint against a frozen baseline engine. The trained engine is
// handed out through `engine_out` when callers need to checkpoint it. When
// `partial` is given, the in-progress report accumulates there so a thrown
// error still leaves the timeseries and checkpoints inspectable.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                std::unique_ptr<Engine>* engine_out = nullptr,
                                RunReport* partial = nullptr);

// Same data and seed, one row per variant; a failed variant is reported in
// its row without aborting the sweep.
struct AblationRow {
  std::string variant;
  double edit_success = 0.0;
  double locality_drop = 0.0;
  double generalization = 0.0;
  double mean_overlap = 0.0;
  double bwt = 0.0;
  bool failed = false;
  std::string error;
};
std::vector<AblationRow> ablation_sweep(const ExperimentConfig& cfg,
                                        const std::vector<std::string>& variants);

// Artifact writers (deterministic byte-for-byte for a fixed config+seed).
void write_run_artifacts(const std::string& out_dir, const ExperimentConfig& cfg,
                         const ExperimentResult& result, const Engine& engine);
std::string timeseries_csv(const std::vector<TimeseriesRow>& rows);
std::string ablation_csv(const std::vector<AblationRow>& rows);

// Diagnostics bundle for a checkpoint: overlap report, routing-weight
// histogram over a probe stream, and randomized non-interference trials
// (exact-orthogonality residuals are reported for the un-gated update; the
// gated deviation is included as a diagnostic, not a bound).
nlohmann::ordered_json diagnose_checkpoint(const std::string& checkpoint_dir,
                                           const std::string& out_dir);

} // namespace dsca
