#include "dsca/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dsca/svg.hpp"

namespace dsca {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace

ExperimentData make_experiment_data(const ExperimentConfig& cfg) {
  ExperimentData data;
  data.world = make_world(cfg.world);

  const int total = cfg.run.edits_total;
  const int tasks = cfg.run.tasks;
  const int edit_begin = first_edit_concept(data.world);
  const int n_edit_concepts = data.world.num_concepts - edit_begin;

  if (tasks <= 1 || n_edit_concepts < tasks) {
    data.edit_stream = generate_stream(data.world, total, 0, cfg.run.seed);
    data.task_case_indices.push_back({});
    for (int i = 0; i < total; ++i) data.task_case_indices[0].push_back(i);
  } else {
    // Task-sequence protocol: edit concepts split into contiguous groups,
    // each task's edits form one block of the stream.
    std::mt19937_64 rng(cfg.run.seed);
    int per_task = total / tasks;
    data.task_case_indices.assign(tasks, {});
    for (int t = 0; t < tasks; ++t) {
      int count = (t == tasks - 1) ? total - per_task * (tasks - 1) : per_task;
      int group_lo = edit_begin + t * n_edit_concepts / tasks;
      int group_hi = edit_begin + (t + 1) * n_edit_concepts / tasks;
      for (int i = 0; i < count; ++i) {
        int c = group_lo + i % std::max(1, group_hi - group_lo);
        Sample s = draw_sample(data.world, c, rng);
        s.split = "edit";
        s.target_class = edit_target_class(data.world, c);
        data.task_case_indices[t].push_back(static_cast<int>(data.edit_stream.size()));
        data.edit_stream.push_back(std::move(s));
      }
    }
  }

  data.replay_pool =
      generate_stream(data.world, 0, cfg.run.replay_pool_size, cfg.run.seed + 101);

  EvalSetParams ep;
  ep.seed = cfg.run.seed + 202;
  data.eval = build_eval_set(data.world, data.edit_stream, ep);
  return data;
}

namespace {

std::vector<EditEvalSet::Case> cases_by_index(const EditEvalSet& eval,
                                              const std::vector<int>& idx) {
  std::vector<EditEvalSet::Case> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(eval.edit_cases[i]);
  return out;
}

std::vector<EditEvalSet::Case> first_cases(const EditEvalSet& eval, int n) {
  std::vector<EditEvalSet::Case> out(eval.edit_cases.begin(),
                                     eval.edit_cases.begin() + n);
  return out;
}

ojson checkpoint_record(const Engine& engine, const Engine& baseline,
                        const ExperimentData& data, int edits_done) {
  ojson rec;
  rec["edits_done"] = edits_done;
  rec["step"] = engine.state().step;
  rec["concepts"] = static_cast<int>(engine.state().concepts.size());
  rec["active_dsams"] = engine.active_dsam_count();
  auto [mo, mx] = engine.current_overlap();
  rec["mean_overlap"] = mo;
  rec["max_overlap"] = mx;
  if (edits_done > 0) {
    auto seen = first_cases(data.eval, edits_done);
    rec["reliability"] = reliability(engine, seen);
    rec["t_gen"] = generalization(engine, seen, NeighborKind::text);
    rec["v_gen"] = generalization(engine, seen, NeighborKind::visual);
  }
  rec["t_loc"] =
      locality(engine, baseline, data.eval.unrelated_text, LocalityKind::text);
  rec["m_loc"] = locality(engine, baseline, data.eval.unrelated_multimodal,
                          LocalityKind::multimodal);
  // Per-task reliability over full task case sets (accuracy-matrix column).
  ojson per_task = ojson::array();
  for (const auto& idx : data.task_case_indices) {
    if (idx.empty()) continue;
    per_task.push_back(reliability(engine, cases_by_index(data.eval, idx)));
  }
  rec["per_task_reliability"] = per_task;
  return rec;
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                std::unique_ptr<Engine>* engine_out,
                                RunReport* partial) {
  cfg.validate();
  EngineConfig variant_cfg = apply_variant(cfg.engine, cfg.run.variant);
  ExperimentData data = make_experiment_data(cfg);

  Engine baseline(variant_cfg, data.world, cfg.run.seed);
  auto engine_ptr = std::make_unique<Engine>(variant_cfg, data.world, cfg.run.seed);
  Engine& engine = *engine_ptr;

  ExperimentResult result;
  result.variant = cfg.run.variant;
  RunReport local;
  RunReport& report = partial ? *partial : local;

  const int tasks = static_cast<int>(data.task_case_indices.size());
  Engine::RunHooks hooks;
  hooks.checkpoint_count = cfg.run.checkpoints;
  hooks.evaluate = [&](const Engine& e, int edits_done) {
    return checkpoint_record(e, baseline, data, edits_done);
  };

  if (tasks <= 1) {
    engine.run_lifelong(data.edit_stream, data.replay_pool, cfg.run.edits_total,
                        hooks, report);
  } else {
    // Per-task blocks with an evaluation at every boundary.
    report.checkpoints.push_back(checkpoint_record(engine, baseline, data, 0));
    AccuracyMatrix acc;
    acc.a = Mat(tasks, tasks);
    acc.zero_shot.resize(tasks);
    for (int i = 0; i < tasks; ++i)
      acc.zero_shot[i] =
          report.checkpoints[0]["per_task_reliability"][i].get<double>();

    int done = 0;
    for (int t = 0; t < tasks; ++t) {
      std::vector<Sample> block;
      for (int i : data.task_case_indices[t]) block.push_back(data.edit_stream[i]);
      Engine::RunHooks quiet;
      quiet.checkpoint_count = 0;
      quiet.evaluate = nullptr;
      engine.run_lifelong(block, data.replay_pool,
                          static_cast<int>(block.size()), quiet, report);
      done += static_cast<int>(block.size());
      ojson rec = checkpoint_record(engine, baseline, data, done);
      rec["task_finished"] = t;
      for (int i = 0; i < tasks; ++i)
        acc.a.at(t, i) = rec["per_task_reliability"][i].get<double>();
      report.checkpoints.push_back(std::move(rec));
    }
    report.final_record = report.checkpoints.back();
    report.completed = true;
    result.accuracy_matrix = acc;
    result.continual = cl_metrics(acc);
  }

  // Final metric block over the complete eval set.
  result.reliability = reliability(engine, data.eval.edit_cases);
  result.t_gen = generalization(engine, data.eval.edit_cases, NeighborKind::text);
  result.v_gen = generalization(engine, data.eval.edit_cases, NeighborKind::visual);
  result.t_loc =
      locality(engine, baseline, data.eval.unrelated_text, LocalityKind::text);
  result.m_loc = locality(engine, baseline, data.eval.unrelated_multimodal,
                          LocalityKind::multimodal);
  auto [mo, mx] = engine.current_overlap();
  result.mean_overlap = mo;
  result.max_overlap = mx;
  result.concepts = static_cast<int>(engine.state().concepts.size());
  result.active_dsams = engine.active_dsam_count();

  std::vector<RoutingDecision> replay_decisions;
  for (const Sample& s : data.replay_pool)
    replay_decisions.push_back(engine.edit_inference(s).decision);
  result.replay_sparsity = sparsity_report(replay_decisions);

  result.report = report;
  if (engine_out) *engine_out = std::move(engine_ptr);
  return result;
}

std::vector<AblationRow> ablation_sweep(const ExperimentConfig& cfg,
                                        const std::vector<std::string>& variants) {
  std::vector<AblationRow> rows;
  for (const std::string& v : variants) {
    AblationRow row;
    row.variant = v;
    try {
      ExperimentConfig vc = cfg;
      vc.run.variant = v;
      ExperimentResult res = run_experiment(vc);
      row.edit_success = res.reliability;
      row.locality_drop = 1.0 - res.m_loc;
      row.generalization = 0.5 * (res.t_gen + res.v_gen);
      row.mean_overlap = res.mean_overlap;
      row.bwt = res.continual ? res.continual->bwt : 0.0;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string timeseries_csv(const std::vector<TimeseriesRow>& rows) {
  std::ostringstream os;
  os << "step,task,align,cdistill,sparse,total,mean_overlap,max_overlap,k,"
        "active_dsams_mean\n";
  for (const TimeseriesRow& r : rows) {
    os << r.step << "," << g17(r.task) << "," << g17(r.align) << ","
       << g17(r.cdistill) << "," << g17(r.sparse) << "," << g17(r.total) << ","
       << g17(r.mean_overlap) << "," << g17(r.max_overlap) << "," << r.k << ","
       << g17(r.active_dsams_mean) << "\n";
  }
  return os.str();
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "variant,edit_success,locality_drop,generalization,mean_overlap,bwt,"
        "failed\n";
  for (const AblationRow& r : rows) {
    os << r.variant << "," << g17(r.edit_success) << "," << g17(r.locality_drop)
       << "," << g17(r.generalization) << "," << g17(r.mean_overlap) << ","
       << g17(r.bwt) << "," << (r.failed ? "1" : "0") << "\n";
  }
  return os.str();
}

void write_run_artifacts(const std::string& out_dir, const ExperimentConfig& cfg,
                         const ExperimentResult& result, const Engine& engine) {
  fs::create_directories(out_dir);
  fs::create_directories(out_dir + "/plots");

  ojson report;
  report["config"] = nlohmann::ordered_json::parse(experiment_config_to_json(cfg));
  report["completed"] = result.report.completed;
  report["checkpoints"] = result.report.checkpoints;
  ojson final_block;
  final_block["reliability"] = result.reliability;
  final_block["t_gen"] = result.t_gen;
  final_block["v_gen"] = result.v_gen;
  final_block["t_loc"] = result.t_loc;
  final_block["m_loc"] = result.m_loc;
  final_block["mean_overlap"] = result.mean_overlap;
  final_block["max_overlap"] = result.max_overlap;
  final_block["concepts"] = result.concepts;
  final_block["active_dsams"] = result.active_dsams;
  final_block["replay_weight_fraction_below_005"] =
      result.replay_sparsity.fraction_below_005;
  final_block["replay_mean_active_dsams"] = result.replay_sparsity.mean_active;
  if (result.continual) {
    final_block["acc"] = result.continual->acc;
    final_block["bwt"] = result.continual->bwt;
    final_block["fwt"] = result.continual->fwt;
    final_block["a_t"] = result.continual->a_t;
  }
  report["final"] = final_block;
  report["warnings"] = engine.warnings();
  std::ofstream(out_dir + "/report.json") << report.dump(2) << "\n";

  std::ofstream(out_dir + "/timeseries.csv") << timeseries_csv(result.report.timeseries);

  // Flat metric records, one JSON object per metric per checkpoint.
  {
    std::ofstream jsonl(out_dir + "/metrics.jsonl");
    for (const auto& ck : result.report.checkpoints) {
      long step = ck.value("step", 0L);
      for (const char* name : {"reliability", "t_gen", "v_gen", "t_loc", "m_loc",
                               "mean_overlap", "max_overlap"}) {
        if (!ck.contains(name)) continue;
        ojson rec;
        rec["metric"] = name;
        rec["value"] = ck.at(name);
        rec["checkpoint_step"] = step;
        rec["variant"] = result.variant;
        jsonl << rec.dump() << "\n";
      }
    }
  }

  if (result.accuracy_matrix) {
    const Mat& a = result.accuracy_matrix->a;
    std::ostringstream os;
    for (int i = 0; i < a.cols; ++i) os << (i ? "," : "") << "task_" << i;
    os << "\n";
    for (int t = 0; t < a.rows; ++t) {
      for (int i = 0; i < a.cols; ++i) os << (i ? "," : "") << g17(a.at(t, i));
      os << "\n";
    }
    std::ofstream(out_dir + "/accuracy_matrix.csv") << os.str();
  }

  // Overlap trajectory (log scale) and replay routing-weight histogram.
  SvgSeries mean_series{"mean_overlap", "#1f77b4", {}, {}};
  SvgSeries max_series{"max_overlap", "#d62728", {}, {}};
  for (const TimeseriesRow& r : result.report.timeseries) {
    mean_series.x.push_back(static_cast<double>(r.step));
    mean_series.y.push_back(std::max(r.mean_overlap, 1e-18));
    max_series.x.push_back(static_cast<double>(r.step));
    max_series.y.push_back(std::max(r.max_overlap, 1e-18));
  }
  std::ofstream(out_dir + "/plots/overlap.svg")
      << svg_line_chart("subspace overlap vs step", {mean_series, max_series}, true);

  std::vector<double> heights;
  for (long c : result.replay_sparsity.counts)
    heights.push_back(static_cast<double>(c));
  std::ofstream(out_dir + "/plots/weights.svg")
      << svg_bar_chart("replay routing weights", result.replay_sparsity.bin_edges,
                       heights);

  save_checkpoint(engine, out_dir + "/checkpoint");
}

nlohmann::ordered_json diagnose_checkpoint(const std::string& checkpoint_dir,
                                           const std::string& out_dir) {
  Engine engine = load_checkpoint(checkpoint_dir);
  fs::create_directories(out_dir);

  ojson diag;
  const EngineState& st = engine.state();

  std::vector<const SubspaceBasis*> active;
  for (const auto& [id, b] : st.bases)
    if (b.active) active.push_back(&b);

  ojson overlap_section;
  if (active.size() < 2) {
    overlap_section["status"] = "K < 2, undefined";
  } else {
    OverlapReport rep = mean_overlap(active);
    overlap_section["status"] = "ok";
    overlap_section["k_active"] = static_cast<int>(active.size());
    overlap_section["mean_overlap"] = rep.mean_overlap;
    overlap_section["max_overlap"] = rep.max_overlap;
  }
  diag["overlap"] = overlap_section;

  // Routing sparsity over a probe replay stream drawn from the stored world.
  std::vector<Sample> probes =
      generate_stream(engine.world(), 0, 400, engine.seed() + 555);
  std::vector<RoutingDecision> decisions;
  for (const Sample& s : probes)
    decisions.push_back(engine.edit_inference(s).decision);
  SparsityReport sparsity = sparsity_report(decisions);
  ojson sp;
  sp["fraction_below_005"] = sparsity.fraction_below_005;
  sp["mean_active"] = sparsity.mean_active;
  sp["total_weights"] = sparsity.total_weights;
  diag["replay_sparsity"] = sp;

  // Randomized interference trials on the stored bases and parameters:
  // un-gated updates against the epsilon-overlap bound, plus the gated
  // deviation from the subspace as a diagnostic.
  ojson interference;
  if (active.size() < 2) {
    interference["status"] = "K < 2, undefined";
  } else {
    OverlapReport rep = mean_overlap(active);
    double eps = rep.max_overlap;
    std::mt19937_64 rng(engine.seed() + 777);
    std::normal_distribution<double> g(0.0, 1.0);
    const int d = engine.world().d_f;
    int violations = 0;
    double worst_margin = 1e300, max_gated_dev = 0.0;
    const int trials = 1000;
    for (int trial = 0; trial < trials; ++trial) {
      Vec h(d);
      for (double& v : h) v = g(rng);
      // Random routing weights over the active set.
      Vec logits(active.size());
      for (double& v : logits) v = g(rng);
      double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (double v : logits) z += std::exp(v - mx);

      std::vector<Vec> updates;
      std::vector<double> ws;
      double gamma_max = 0.0;
      for (size_t k = 0; k < active.size(); ++k) {
        const SubspaceBasis& b = *active[k];
        const DsamParams& p = st.dsams.at(b.concept_id);
        Vec u = raw_update(p, b, h);
        double w = std::exp(logits[k] - mx) / z;
        gamma_max += w * norm2(u);
        updates.push_back(std::move(u));
        ws.push_back(w);

        Vec gated = intervene(p, b, h);
        Vec resid = residualize(gated, {&b});
        double gn = norm2(gated);
        if (gn > 1e-12)
          max_gated_dev = std::max(max_gated_dev, norm2(resid) / gn);
      }
      Vec delta(d, 0.0);
      for (size_t k = 0; k < active.size(); ++k) axpy(ws[k], updates[k], delta);

      for (size_t i = 0; i < active.size(); ++i) {
        Vec coords = matvec(active[i]->rows, delta);
        Vec proj = matvec_t(active[i]->rows, coords);
        Vec own_coords = matvec(active[i]->rows, updates[i]);
        Vec own_proj = matvec_t(active[i]->rows, own_coords);
        Vec inter = sub(proj, scale(own_proj, ws[i]));
        double bound = gamma_max * std::sqrt(eps);
        double margin = bound - norm2(inter);
        worst_margin = std::min(worst_margin, margin);
        if (margin < 0.0) ++violations;
      }
    }
    interference["status"] = "ok";
    interference["trials"] = trials;
    interference["epsilon"] = eps;
    interference["violations"] = violations;
    interference["worst_margin"] = worst_margin;
    interference["max_gated_out_of_subspace_fraction"] = max_gated_dev;
  }
  diag["interference"] = interference;

  std::ofstream(out_dir + "/diagnostics.json") << diag.dump(2) << "\n";
  std::ofstream(out_dir + "/decisions.jsonl") << decisions_to_jsonl(decisions);
  std::vector<double> heights;
  for (long c : sparsity.counts) heights.push_back(static_cast<double>(c));
  std::ofstream(out_dir + "/weights.svg")
      << svg_bar_chart("replay routing weights", sparsity.bin_edges, heights);
  return diag;
}

} // namespace dsca
