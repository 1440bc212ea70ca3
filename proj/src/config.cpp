#include "dsca/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace dsca {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void ExperimentConfig::validate() const {
  if (world.num_concepts < 1) throw config_error("world.num_concepts must be >= 1");
  if (world.dim < 4) throw config_error("world.dim must be >= 4");
  if (world.noise_scale < 0.0) throw config_error("world.noise_scale must be >= 0");
  if (world.mean_radius <= 0.0) throw config_error("world.mean_radius must be > 0");
  if (world.max_mean_cos <= 0.0 || world.max_mean_cos >= 1.0)
    throw config_error("world.max_mean_cos must be in (0,1)");
  engine.validate();
  if (engine.r > world.dim) throw config_error("engine.r exceeds world.dim");
  if (4 * engine.bottleneck > world.dim)
    throw config_error("engine.bottleneck exceeds world.dim/4");
  if (run.edits_total < 0) throw config_error("run.edits_total must be >= 0");
  if (run.replay_pool_size < engine.batch_replay)
    throw config_error("run.replay_pool_size must be >= engine.batch_replay");
  if (run.checkpoints < 1) throw config_error("run.checkpoints must be >= 1");
  if (run.tasks < 1) throw config_error("run.tasks must be >= 1");
  if (output_dir.empty()) throw config_error("output_dir must be set");
  // Variant id check happens here so a bad config fails before any state
  // is constructed.
  apply_variant(engine, run.variant);
}

ExperimentConfig desk_default_config() {
  ExperimentConfig cfg;
  // Desk-scale profile: d_f = 64, r = 8, small bottleneck, fast refinement
  // cadence, a slightly conservative novelty threshold for long streams.
  cfg.world.num_concepts = 16;
  cfg.world.dim = 64;
  cfg.world.noise_scale = 0.1;
  cfg.world.seed = 7;
  cfg.engine.r = 8;
  cfg.engine.bottleneck = 8;
  cfg.engine.n_min = 12;
  cfg.engine.n_refine = 50;
  cfg.engine.alpha = 3.0;
  cfg.engine.lr = 0.05;
  cfg.engine.batch_edit = 4;
  cfg.engine.inner_steps = 30;
  cfg.engine.inner_tol = 0.05;
  cfg.run.edits_total = 200;
  cfg.run.seed = 1;
  return cfg;
}

void apply_paper_profile(ExperimentConfig& cfg) {
  EngineConfig paper = paper_profile_engine();
  paper.alpha = cfg.engine.alpha;
  paper.lr = cfg.engine.lr;
  paper.momentum = cfg.engine.momentum;
  paper.inner_steps = cfg.engine.inner_steps;
  paper.batch_edit = cfg.engine.batch_edit;
  paper.batch_replay = cfg.engine.batch_replay;
  cfg.engine = paper;
}

namespace {

void reject_unknown(const json& j, const std::vector<std::string>& known,
                    const std::string& context) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw config_error(context + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

WorldParams world_params_from_json(const json& j) {
  reject_unknown(j,
                 {"num_concepts", "dim", "noise_scale", "seed", "mean_radius",
                  "max_mean_cos"},
                 "world");
  WorldParams w;
  read_field(j, "num_concepts", w.num_concepts);
  read_field(j, "dim", w.dim);
  read_field(j, "noise_scale", w.noise_scale);
  read_field(j, "seed", w.seed);
  read_field(j, "mean_radius", w.mean_radius);
  read_field(j, "max_mean_cos", w.max_mean_cos);
  return w;
}

RunParams run_params_from_json(const json& j) {
  reject_unknown(j,
                 {"edits_total", "replay_pool_size", "checkpoints", "tasks",
                  "seed", "variant"},
                 "run");
  RunParams r;
  read_field(j, "edits_total", r.edits_total);
  read_field(j, "replay_pool_size", r.replay_pool_size);
  read_field(j, "checkpoints", r.checkpoints);
  read_field(j, "tasks", r.tasks);
  read_field(j, "seed", r.seed);
  read_field(j, "variant", r.variant);
  return r;
}

// Byte offset -> 1-based line number, for parse diagnostics.
int line_of_offset(const std::string& text, size_t offset) {
  int line = 1;
  for (size_t i = 0; i < offset && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

} // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw config_error("config parse error at line " +
                       std::to_string(line_of_offset(text, e.byte)) + ": " +
                       e.what());
  }

  reject_unknown(j, {"world", "engine", "run", "output_dir"}, "config");
  ExperimentConfig cfg;
  try {
    if (j.contains("world")) cfg.world = world_params_from_json(j.at("world"));
    if (j.contains("engine")) cfg.engine = engine_config_from_json(j.at("engine"));
    if (j.contains("run")) cfg.run = run_params_from_json(j.at("run"));
    read_field(j, "output_dir", cfg.output_dir);
  } catch (const config_error&) {
    throw;
  } catch (const json::exception& e) {
    throw config_error(std::string("config type error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
  ojson j;
  j["world"] = {{"num_concepts", cfg.world.num_concepts},
                {"dim", cfg.world.dim},
                {"noise_scale", cfg.world.noise_scale},
                {"seed", cfg.world.seed},
                {"mean_radius", cfg.world.mean_radius},
                {"max_mean_cos", cfg.world.max_mean_cos}};
  j["engine"] = engine_config_to_json(cfg.engine);
  j["run"] = {{"edits_total", cfg.run.edits_total},
              {"replay_pool_size", cfg.run.replay_pool_size},
              {"checkpoints", cfg.run.checkpoints},
              {"tasks", cfg.run.tasks},
              {"seed", cfg.run.seed},
              {"variant", cfg.run.variant}};
  j["output_dir"] = cfg.output_dir;
  return j.dump(2);
}

} // namespace dsca
