// dsca: lifelong representation-editing experiments on the synthetic
// backbone surrogate.
//
// Subcommands:
//   run       sequential editing run, writes report/timeseries/checkpoint
//   ablate    paired-seed variant sweep, writes a comparison CSV
//   gradcheck finite-difference verification of the analytic gradients
//   diagnose  overlap/sparsity/interference bundle for a checkpoint
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid config, 3 gradient
// check failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dsca/config.hpp"
#include "dsca/experiment.hpp"
#include "dsca/gradcheck.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  long seed_override = -1;
  std::string variant_override;
  bool paper_profile = false;
};

dsca::ExperimentConfig load_config(const CommonOpts& opts) {
  dsca::ExperimentConfig cfg = dsca::load_experiment_config(opts.config_path);
  if (opts.paper_profile) dsca::apply_paper_profile(cfg);
  if (opts.seed_override >= 0)
    cfg.run.seed = static_cast<uint64_t>(opts.seed_override);
  if (!opts.variant_override.empty()) cfg.run.variant = opts.variant_override;
  if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;
  cfg.validate();
  return cfg;
}

int cmd_run(const CommonOpts& opts) {
  dsca::ExperimentConfig cfg = load_config(opts);
  std::unique_ptr<dsca::Engine> engine;
  dsca::ExperimentResult result;
  dsca::RunReport partial;
  try {
    result = dsca::run_experiment(cfg, &engine, &partial);
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    // Flush whatever survived so partial runs stay inspectable.
    fs::create_directories(cfg.output_dir);
    nlohmann::ordered_json stub;
    stub["completed"] = false;
    stub["error"] = e.what();
    stub["checkpoints"] = partial.checkpoints;
    std::ofstream(cfg.output_dir + "/report.json") << stub.dump(2) << "\n";
    std::ofstream(cfg.output_dir + "/timeseries.csv")
        << dsca::timeseries_csv(partial.timeseries);
    return 1;
  }
  dsca::write_run_artifacts(cfg.output_dir, cfg, result, *engine);
  std::cout << "run complete: " << cfg.run.edits_total << " edits, "
            << result.concepts << " concepts, reliability "
            << result.reliability << ", m_loc " << result.m_loc
            << ", mean_overlap " << result.mean_overlap << "\n";
  std::cout << "artifacts in " << cfg.output_dir << "\n";
  return 0;
}

int cmd_ablate(const CommonOpts& opts, std::vector<std::string> variants) {
  dsca::ExperimentConfig cfg = load_config(opts);
  if (variants.empty()) variants = dsca::known_variants();
  for (const std::string& v : variants)
    dsca::apply_variant(cfg.engine, v);  // reject unknown ids up front

  std::vector<dsca::AblationRow> rows = dsca::ablation_sweep(cfg, variants);
  fs::create_directories(cfg.output_dir);
  std::string csv = dsca::ablation_csv(rows);
  std::ofstream(cfg.output_dir + "/ablation.csv") << csv;
  std::cout << csv;

  bool any_failed = false;
  for (const auto& r : rows) any_failed |= r.failed;
  return any_failed ? 1 : 0;
}

int cmd_gradcheck(const CommonOpts& opts, int states, bool corrupt) {
  dsca::ExperimentConfig cfg = load_config(opts);
  dsca::GradcheckReport rep =
      dsca::run_gradcheck_suite(states, cfg.run.seed, corrupt);
  for (const auto& t : rep.tensors) {
    std::printf("dsam %d %-7s worst_rel_err %.3e (analytic %.6e numeric %.6e at %zu)\n",
                t.concept_id, t.tensor.c_str(), t.worst_rel_err, t.analytic,
                t.numeric, t.worst_index);
  }
  std::printf("gradcheck %s: worst relative error %.3e over %d states\n",
              rep.pass ? "PASS" : "FAIL", rep.worst_rel_err, states);
  return rep.pass ? 0 : 3;
}

int cmd_diagnose(const std::string& checkpoint, const std::string& out_dir) {
  auto diag = dsca::diagnose_checkpoint(checkpoint, out_dir);
  std::cout << diag.dump(2) << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"DSCA lifelong representation-editing engine"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::vector<std::string> variants;
  int gradcheck_states = 10;
  bool corrupt = false;
  std::string checkpoint_dir, diag_out = "diagnostics";

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", opts.config_path, "experiment config JSON");
    if (needs_config) c->required();
    sub->add_option("--out", opts.out_dir, "output directory override");
    sub->add_option("--seed", opts.seed_override, "run seed override");
    sub->add_flag("--paper-profile", opts.paper_profile,
                  "load the published hyperparameter profile");
  };

  CLI::App* run = app.add_subcommand("run", "sequential editing run");
  add_common(run, true);
  run->add_option("--variant", opts.variant_override, "ablation variant id");

  CLI::App* ablate = app.add_subcommand("ablate", "variant comparison sweep");
  add_common(ablate, true);
  ablate->add_option("--variants", variants, "variant ids (default: all)");

  CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common(grad, true);
  grad->add_option("--states", gradcheck_states, "number of random states");
  grad->add_flag("--corrupt-gradient", corrupt,
                 "perturb one analytic gradient (negative-control hook)");

  CLI::App* diag = app.add_subcommand("diagnose", "checkpoint diagnostics bundle");
  diag->add_option("--checkpoint", checkpoint_dir, "checkpoint directory")->required();
  diag->add_option("--out", diag_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(opts);
    if (ablate->parsed()) return cmd_ablate(opts, variants);
    if (grad->parsed()) return cmd_gradcheck(opts, gradcheck_states, corrupt);
    if (diag->parsed()) return cmd_diagnose(checkpoint_dir, diag_out);
  } catch (const dsca::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
