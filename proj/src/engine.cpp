#include "dsca/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dsca {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

void EngineConfig::validate() const {
  if (r < 1) throw config_error("engine.r must be >= 1");
  if (bottleneck < 1) throw config_error("engine.bottleneck must be >= 1");
  if (n_min < 1) throw config_error("engine.n_min must be >= 1");
  if (n_refine < 1) throw config_error("engine.n_refine must be >= 1");
  if (alpha <= 0.0) throw config_error("engine.alpha must be > 0");
  if (ema_rate <= 0.0 || ema_rate >= 1.0)
    throw config_error("engine.ema_rate must be in (0,1)");
  if (buffer_capacity < 1) throw config_error("engine.buffer_capacity must be >= 1");
  if (init_std < 0.0) throw config_error("engine.init_std must be >= 0");
  if (tau <= 0.0) throw config_error("engine.tau must be > 0");
  if (tau_visual <= -1.0 || tau_visual >= 1.0)
    throw config_error("engine.tau_visual must be in (-1,1)");
  if (lr <= 0.0) throw config_error("engine.lr must be > 0");
  if (momentum < 0.0 || momentum >= 1.0)
    throw config_error("engine.momentum must be in [0,1)");
  if (batch_edit < 1) throw config_error("engine.batch_edit must be >= 1");
  if (batch_replay < 2) throw config_error("engine.batch_replay must be >= 2");
  if (inner_steps < 1) throw config_error("engine.inner_steps must be >= 1");
  if (inner_tol < 0.0) throw config_error("engine.inner_tol must be >= 0");
  try {
    loss_weights.validate();
  } catch (const std::exception& e) {
    throw config_error(std::string("engine.loss_weights: ") + e.what());
  }
}

PartitionerConfig EngineConfig::partitioner() const {
  PartitionerConfig p;
  p.alpha = alpha;
  p.ema_rate = ema_rate;
  p.buffer_capacity = buffer_capacity;
  p.init_std = init_std;
  return p;
}

RouterConfig EngineConfig::router() const {
  RouterConfig rc;
  rc.tau = tau;
  rc.tau_visual = tau_visual;
  return rc;
}

ForwardOptions EngineConfig::forward_options() const {
  ForwardOptions o;
  o.router = router();
  o.single_stage = single_stage;
  o.basis_residual = basis_residual;
  return o;
}

EngineConfig paper_profile_engine() {
  EngineConfig c;
  c.r = 128;
  c.n_min = 32;
  c.n_refine = 500;
  c.tau = 0.07;
  c.loss_weights.lambda_align = 0.5;
  c.loss_weights.lambda_distill = 1.0;
  c.loss_weights.lambda_sparse = 1e-2;
  c.bottleneck = 16;
  return c;
}

ojson engine_config_to_json(const EngineConfig& c) {
  ojson j;
  j["r"] = c.r;
  j["bottleneck"] = c.bottleneck;
  j["n_min"] = c.n_min;
  j["n_refine"] = c.n_refine;
  j["alpha"] = c.alpha;
  j["ema_rate"] = c.ema_rate;
  j["buffer_capacity"] = c.buffer_capacity;
  j["init_std"] = c.init_std;
  j["tau"] = c.tau;
  j["tau_visual"] = c.tau_visual;
  j["loss_weights"] = {{"lambda_align", c.loss_weights.lambda_align},
                       {"lambda_distill", c.loss_weights.lambda_distill},
                       {"lambda_sparse", c.loss_weights.lambda_sparse},
                       {"tau_distill", c.loss_weights.tau_distill},
                       {"align_visual_form", c.loss_weights.align_visual_form},
                       {"sparse_on_logits", c.loss_weights.sparse_on_logits}};
  j["lr"] = c.lr;
  j["momentum"] = c.momentum;
  j["batch_edit"] = c.batch_edit;
  j["batch_replay"] = c.batch_replay;
  j["inner_steps"] = c.inner_steps;
  j["inner_tol"] = c.inner_tol;
  j["orthogonalize"] = c.orthogonalize;
  j["single_stage"] = c.single_stage;
  j["basis_residual"] = c.basis_residual;
  return j;
}

namespace {

void reject_unknown_keys(const json& j, const std::vector<std::string>& known,
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

} // namespace

EngineConfig engine_config_from_json(const json& j) {
  EngineConfig c;
  reject_unknown_keys(
      j,
      {"r", "bottleneck", "n_min", "n_refine", "alpha", "ema_rate",
       "buffer_capacity", "init_std", "tau", "tau_visual", "loss_weights", "lr",
       "momentum", "batch_edit", "batch_replay", "inner_steps", "inner_tol",
       "orthogonalize",
       "single_stage", "basis_residual"},
      "engine");
  read_field(j, "r", c.r);
  read_field(j, "bottleneck", c.bottleneck);
  read_field(j, "n_min", c.n_min);
  read_field(j, "n_refine", c.n_refine);
  read_field(j, "alpha", c.alpha);
  read_field(j, "ema_rate", c.ema_rate);
  read_field(j, "buffer_capacity", c.buffer_capacity);
  read_field(j, "init_std", c.init_std);
  read_field(j, "tau", c.tau);
  read_field(j, "tau_visual", c.tau_visual);
  if (j.contains("loss_weights")) {
    const json& lw = j.at("loss_weights");
    reject_unknown_keys(lw,
                        {"lambda_align", "lambda_distill", "lambda_sparse",
                         "tau_distill", "align_visual_form", "sparse_on_logits"},
                        "engine.loss_weights");
    read_field(lw, "lambda_align", c.loss_weights.lambda_align);
    read_field(lw, "lambda_distill", c.loss_weights.lambda_distill);
    read_field(lw, "lambda_sparse", c.loss_weights.lambda_sparse);
    read_field(lw, "tau_distill", c.loss_weights.tau_distill);
    read_field(lw, "align_visual_form", c.loss_weights.align_visual_form);
    read_field(lw, "sparse_on_logits", c.loss_weights.sparse_on_logits);
  }
  read_field(j, "lr", c.lr);
  read_field(j, "momentum", c.momentum);
  read_field(j, "batch_edit", c.batch_edit);
  read_field(j, "batch_replay", c.batch_replay);
  read_field(j, "inner_steps", c.inner_steps);
  read_field(j, "inner_tol", c.inner_tol);
  read_field(j, "orthogonalize", c.orthogonalize);
  read_field(j, "single_stage", c.single_stage);
  read_field(j, "basis_residual", c.basis_residual);
  c.validate();
  return c;
}

Engine::Engine(EngineConfig cfg, WorldModel world, uint64_t seed)
    : world_(std::move(world)),
      head_(make_head(world_)),
      optimizer_(cfg.lr, cfg.momentum),
      seed_(seed),
      run_rng_(seed ^ 0x5851f42d4c957f2dULL) {
  cfg.validate();
  world_.validate();
  if (cfg.r > world_.d_f) throw config_error("engine.r exceeds d_f");
  if (4 * cfg.bottleneck > world_.d_f)
    throw config_error("engine.bottleneck exceeds d_f/4");
  if (cfg.n_min < cfg.r) {
    warnings_.push_back(
        "n_min below r: subspace activation deferred until r+1 samples "
        "accumulate");
  }
  state_.config = cfg;
}

int Engine::activation_threshold() const {
  return std::max(state_.config.n_min, state_.config.r + 1);
}

int Engine::active_dsam_count() const {
  int n = 0;
  for (const Concept& c : state_.concepts)
    if (c.dsam_active) ++n;
  return n;
}

std::pair<double, double> Engine::current_overlap() const {
  if (!overlap_dirty_) return overlap_cache_;
  std::vector<const SubspaceBasis*> active;
  for (const auto& [id, b] : state_.bases)
    if (b.active) active.push_back(&b);
  if (active.size() < 2) {
    overlap_cache_ = {0.0, 0.0};
  } else {
    OverlapReport rep = mean_overlap(active);
    overlap_cache_ = {rep.mean_overlap, rep.max_overlap};
  }
  overlap_dirty_ = false;
  return overlap_cache_;
}

void Engine::assign_edit_batch(const std::vector<Sample>& edit_batch) {
  PartitionerConfig pc = state_.config.partitioner();
  for (const Sample& s : edit_batch) {
    auto [id, spawned] = assign_or_spawn(state_.concepts, s.fused, s.visual, pc);
    (void)id;
    if (spawned)
      audit_.spawns += 1;
    else
      audit_.proto_updates += 1;
  }
}

LossBreakdown Engine::train_step(const std::vector<Sample>& edit_batch,
                                 const std::vector<Sample>& replay_batch,
                                 bool update_concepts) {
  // Snapshot the mutable parts; bases change only in refine_subspaces.
  std::vector<Concept> concepts_snap = state_.concepts;
  std::map<int, DsamParams> dsams_snap = state_.dsams;
  long step_snap = state_.step;
  MutationAudit audit_snap = audit_;

  try {
    if (update_concepts) assign_edit_batch(edit_batch);

    ForwardTrace trace;
    LossBreakdown bd =
        total_loss(edit_batch, replay_batch, state_.concepts, state_.bases,
                   state_.dsams, head_, state_.config.loss_weights,
                   state_.config.forward_options(), &trace);
    std::map<int, DsamGrads> grads =
        backward(trace, state_.bases, state_.dsams, head_,
                 state_.config.loss_weights);
    optimizer_.step(state_.dsams, grads);
    audit_.grad_steps += 1;
    state_.step += 1;
    return bd;
  } catch (...) {
    state_.concepts = std::move(concepts_snap);
    state_.dsams = std::move(dsams_snap);
    state_.step = step_snap;
    audit_ = audit_snap;
    throw;
  }
}

std::vector<const SubspaceBasis*> Engine::other_active_bases(int self_id) const {
  std::vector<const SubspaceBasis*> out;
  for (const auto& [id, b] : state_.bases)
    if (id != self_id && b.active) out.push_back(&b);
  return out;
}

void Engine::refine_subspaces() {
  const EngineConfig& cfg = state_.config;
  for (Concept& c : state_.concepts) {
    std::vector<Vec> buffered(c.buffer.begin(), c.buffer.end());
    if (c.dsam_active) {
      if (buffered.empty()) continue;
      auto earlier = cfg.orthogonalize ? other_active_bases(c.id)
                                       : std::vector<const SubspaceBasis*>{};
      const SubspaceBasis& old_basis = state_.bases.at(c.id);
      SubspaceBasis refined = ipca_refine(old_basis, buffered, earlier);

      // Re-express the trained transformation in the refreshed basis so the
      // learned intervention survives the rotation: with M = R_new R_old^T,
      // target coords map as a_new = M a_old.
      DsamParams& p = state_.dsams.at(c.id);
      Mat m = matmul_nt(refined.rows, old_basis.rows);
      Mat w_new(p.W.rows, p.W.cols);
      Vec b_new(p.b.size(), 0.0);
      for (int i = 0; i < m.rows; ++i) {
        for (int k = 0; k < m.cols; ++k) {
          double mik = m.at(i, k);
          if (mik == 0.0) continue;
          b_new[i] += mik * p.b[k];
          const double* wrow = p.W.row(k);
          const double* rrow = old_basis.rows.row(k);
          double* out = w_new.row(i);
          if (cfg.basis_residual) {
            for (int j = 0; j < p.W.cols; ++j) out[j] += mik * (wrow[j] - rrow[j]);
          } else {
            for (int j = 0; j < p.W.cols; ++j) out[j] += mik * wrow[j];
          }
        }
      }
      if (cfg.basis_residual) {
        for (int i = 0; i < w_new.rows; ++i) {
          const double* rnew = refined.rows.row(i);
          double* out = w_new.row(i);
          for (int j = 0; j < w_new.cols; ++j) out[j] += rnew[j];
        }
      }
      p.W = std::move(w_new);
      p.b = std::move(b_new);

      state_.bases[c.id] = std::move(refined);
      audit_.basis_refines += 1;
      c.buffer.clear();
      overlap_dirty_ = true;
      continue;
    }
    if (static_cast<int>(buffered.size()) < activation_threshold()) continue;

    std::vector<Vec> feats = buffered;
    if (cfg.orthogonalize) {
      auto earlier = other_active_bases(c.id);
      for (Vec& f : feats) f = residualize(f, earlier);
    }
    try {
      SubspaceBasis basis = pca_init(feats, cfg.r, c.id);
      uint64_t dsam_seed = seed_ ^ (0x9e3779b97f4a7c15ULL * (c.id + 1));
      DsamParams params = make_noop_params(basis, cfg.bottleneck, dsam_seed);
      state_.bases[c.id] = std::move(basis);
      state_.dsams[c.id] = std::move(params);
      c.dsam_active = true;
      c.buffer.clear();
      audit_.basis_inits += 1;
      overlap_dirty_ = true;
    } catch (const rank_error& e) {
      // Not enough variance yet; keep buffering and retry next interval.
      warnings_.push_back("concept " + std::to_string(c.id) +
                          " PCA deferred: " + e.what());
    }
  }
}

Engine::Inference Engine::edit_inference(const Sample& s) const {
  ForwardOptions opt = state_.config.forward_options();
  SampleCache c = forward_sample(s, state_.concepts, state_.bases, state_.dsams, opt);
  return Inference{std::move(c.edited), std::move(c.decision)};
}

void Engine::run_lifelong(const std::vector<Sample>& stream,
                          const std::vector<Sample>& replay_pool, int edits_total,
                          const RunHooks& hooks, RunReport& report) {
  if (edits_total < 0) throw std::invalid_argument("run_lifelong: negative count");
  if (static_cast<int>(stream.size()) < edits_total)
    throw std::invalid_argument("run_lifelong: stream shorter than edits_total");
  const EngineConfig& cfg = state_.config;
  if (static_cast<int>(replay_pool.size()) < cfg.batch_replay)
    throw std::invalid_argument("run_lifelong: replay pool smaller than batch_replay");

  report.completed = false;
  if (hooks.evaluate) report.checkpoints.push_back(hooks.evaluate(*this, 0));

  int checkpoint_every = edits_total;
  if (hooks.checkpoint_count > 0 && edits_total > 0)
    checkpoint_every = std::max(1, edits_total / hooks.checkpoint_count);

  std::uniform_int_distribution<size_t> pool_pick(0, replay_pool.size() - 1);

  for (int e = 0; e < edits_total; ++e) {
    const Sample& edit = stream[e];
    // The stream sample enters the partitioner exactly once; rehearsal draws
    // below only fill the loss batch and must not refill old buffers, or
    // later refinements would rotate bases out from under frozen modules.
    assign_edit_batch({edit});

    for (int inner = 0; inner < cfg.inner_steps; ++inner) {
      std::vector<Sample> edit_batch{edit};
      for (int extra = 1; extra < cfg.batch_edit && e > 0; ++extra) {
        std::uniform_int_distribution<int> prev(0, e - 1);
        edit_batch.push_back(stream[prev(run_rng_)]);
      }
      // Uniform without replacement from the fixed replay pool.
      std::vector<Sample> replay_batch;
      std::vector<size_t> chosen;
      while (static_cast<int>(replay_batch.size()) < cfg.batch_replay) {
        size_t idx = pool_pick(run_rng_);
        if (std::find(chosen.begin(), chosen.end(), idx) != chosen.end()) continue;
        chosen.push_back(idx);
        replay_batch.push_back(replay_pool[idx]);
      }

      LossBreakdown bd = train_step(edit_batch, replay_batch, false);
      if (state_.step % cfg.n_refine == 0) refine_subspaces();

      bool edit_converged = false;
      if (cfg.inner_tol > 0.0) {
        Inference inf = edit_inference(edit);
        edit_converged =
            loss_task(inf.edited, edit.target_class, head_) <= cfg.inner_tol;
      }

      TimeseriesRow row;
      row.step = state_.step;
      row.task = bd.task;
      row.align = bd.align;
      row.cdistill = bd.cdistill;
      row.sparse = bd.sparse;
      row.total = bd.total;
      auto [mo, mx] = current_overlap();
      row.mean_overlap = mo;
      row.max_overlap = mx;
      row.k = static_cast<int>(state_.concepts.size());
      // Active modules per input at the 0.05 threshold, over this step's batch.
      int samples = 0, active = 0;
      auto count_active = [&](const Sample& s) {
        Inference inf = edit_inference(s);
        for (const auto& [id, w] : inf.decision.weights)
          if (w > 0.05) ++active;
        ++samples;
      };
      for (const Sample& s : edit_batch) count_active(s);
      for (const Sample& s : replay_batch) count_active(s);
      row.active_dsams_mean = samples ? static_cast<double>(active) / samples : 0.0;
      report.timeseries.push_back(row);
      if (edit_converged) break;
    }

    if (hooks.evaluate && (e + 1) % checkpoint_every == 0)
      report.checkpoints.push_back(hooks.evaluate(*this, e + 1));
  }

  if (hooks.evaluate) {
    if (report.checkpoints.empty() ||
        report.checkpoints.back().value("edits_done", -1) != edits_total)
      report.checkpoints.push_back(hooks.evaluate(*this, edits_total));
    report.final_record = report.checkpoints.back();
  }
  report.completed = true;
}

EngineConfig apply_variant(const EngineConfig& base, const std::string& variant) {
  EngineConfig c = base;
  if (variant == "full") return c;
  if (variant == "no_orthogonality") {
    c.orthogonalize = false;
    return c;
  }
  if (variant == "no_gate_sparsity") {
    c.loss_weights.lambda_sparse = 0.0;
    return c;
  }
  if (variant == "single_stage_routing") {
    c.single_stage = true;
    return c;
  }
  if (variant == "no_basis_residual") {
    c.basis_residual = false;
    return c;
  }
  if (variant == "half_subspaces") {
    c.alpha = 2.0 * base.alpha;  // fewer clusters spawn
    return c;
  }
  if (variant == "half_rank") {
    c.r = std::max(1, base.r / 2);
    return c;
  }
  if (variant == "dense") {
    // Dense-update reference: one shared module, no routing. The huge fresh
    // sigma keeps every sample inside the first cluster.
    c.init_std = 1e9;
    c.single_stage = true;
    return c;
  }
  std::string valid;
  for (const std::string& v : known_variants()) valid += v + " ";
  throw config_error("unknown variant '" + variant + "'; valid: " + valid);
}

std::vector<std::string> known_variants() {
  return {"full",           "no_orthogonality",  "no_gate_sparsity",
          "single_stage_routing", "no_basis_residual", "half_subspaces",
          "half_rank",      "dense"};
}

// ---------------------------------------------------------------------------
// Checkpoints: JSON for config/concepts/world, JSON-header + raw float64
// payload for bases and DSAM parameters.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'S', 'C', 'A'};

void write_payload_file(const std::string& path, const ojson& header,
                        const std::vector<double>& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  std::string htext = header.dump();
  uint64_t hlen = htext.size();
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
}

std::pair<json, std::vector<double>> read_payload_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("bad checkpoint magic in " + path);
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  json header = json::parse(htext);
  std::vector<double> payload;
  double v;
  while (in.read(reinterpret_cast<char*>(&v), sizeof(v))) payload.push_back(v);
  return {header, payload};
}

void append(std::vector<double>& dst, const std::vector<double>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

} // namespace

void save_checkpoint(const Engine& engine, const std::string& dir) {
  fs::create_directories(dir);
  const EngineState& st = engine.state();

  ojson meta;
  meta["config"] = engine_config_to_json(st.config);
  meta["step"] = st.step;
  meta["seed"] = engine.seed();
  std::ofstream(dir + "/engine.json") << meta.dump(2) << "\n";
  std::ofstream(dir + "/world.json") << world_to_json(engine.world()) << "\n";
  std::ofstream(dir + "/concepts.json") << concepts_to_json(st.concepts) << "\n";

  ojson bheader = ojson::array();
  std::vector<double> bpayload;
  for (const auto& [id, b] : st.bases) {
    ojson e;
    e["id"] = id;
    e["rank"] = b.rank;
    e["dim"] = b.dim();
    e["version"] = b.version;
    e["n_seen"] = b.n_seen;
    e["active"] = b.active;
    e["offset"] = bpayload.size();
    bheader.push_back(e);
    append(bpayload, b.rows.a);
    append(bpayload, b.mean);
    append(bpayload, b.singular_values);
  }
  write_payload_file(dir + "/subspaces.bin", bheader, bpayload);

  ojson dheader = ojson::array();
  std::vector<double> dpayload;
  for (const auto& [id, p] : st.dsams) {
    ojson e;
    e["id"] = id;
    e["rank"] = p.W.rows;
    e["dim"] = p.W.cols;
    e["bottleneck"] = p.bottleneck;
    e["offset"] = dpayload.size();
    dheader.push_back(e);
    append(dpayload, p.W.a);
    append(dpayload, p.b);
    append(dpayload, p.gate_U.a);
    append(dpayload, p.gate_V.a);
    append(dpayload, p.gate_b);
  }
  write_payload_file(dir + "/dsams.bin", dheader, dpayload);
}

Engine load_checkpoint(const std::string& dir) {
  std::ifstream meta_in(dir + "/engine.json");
  if (!meta_in) throw std::runtime_error("cannot read " + dir + "/engine.json");
  json meta = json::parse(meta_in);
  EngineConfig cfg = engine_config_from_json(meta.at("config"));

  std::ifstream world_in(dir + "/world.json");
  if (!world_in) throw std::runtime_error("cannot read " + dir + "/world.json");
  std::stringstream wbuf;
  wbuf << world_in.rdbuf();
  WorldModel world = world_from_json(wbuf.str());

  Engine engine(cfg, std::move(world), meta.at("seed").get<uint64_t>());
  engine.state_.step = meta.at("step").get<long>();

  std::ifstream conc_in(dir + "/concepts.json");
  std::stringstream cbuf;
  cbuf << conc_in.rdbuf();
  engine.state_.concepts = concepts_from_json(cbuf.str());

  auto [bheader, bpayload] = read_payload_file(dir + "/subspaces.bin");
  for (const json& e : bheader) {
    SubspaceBasis b;
    b.concept_id = e.at("id").get<int>();
    b.rank = e.at("rank").get<int>();
    int dim = e.at("dim").get<int>();
    b.version = e.at("version").get<long>();
    b.n_seen = e.at("n_seen").get<long>();
    b.active = e.at("active").get<bool>();
    size_t off = e.at("offset").get<size_t>();
    b.rows = Mat(b.rank, dim);
    std::copy_n(bpayload.begin() + off, b.rows.a.size(), b.rows.a.begin());
    off += b.rows.a.size();
    b.mean.assign(bpayload.begin() + off, bpayload.begin() + off + dim);
    off += dim;
    b.singular_values.assign(bpayload.begin() + off, bpayload.begin() + off + b.rank);
    engine.state_.bases[b.concept_id] = std::move(b);
  }

  auto [dheader, dpayload] = read_payload_file(dir + "/dsams.bin");
  for (const json& e : dheader) {
    DsamParams p;
    p.concept_id = e.at("id").get<int>();
    int rank = e.at("rank").get<int>();
    int dim = e.at("dim").get<int>();
    p.bottleneck = e.at("bottleneck").get<int>();
    size_t off = e.at("offset").get<size_t>();
    p.W = Mat(rank, dim);
    std::copy_n(dpayload.begin() + off, p.W.a.size(), p.W.a.begin());
    off += p.W.a.size();
    p.b.assign(dpayload.begin() + off, dpayload.begin() + off + rank);
    off += rank;
    p.gate_U = Mat(dim, p.bottleneck);
    std::copy_n(dpayload.begin() + off, p.gate_U.a.size(), p.gate_U.a.begin());
    off += p.gate_U.a.size();
    p.gate_V = Mat(p.bottleneck, dim);
    std::copy_n(dpayload.begin() + off, p.gate_V.a.size(), p.gate_V.a.begin());
    off += p.gate_V.a.size();
    p.gate_b.assign(dpayload.begin() + off, dpayload.begin() + off + dim);
    engine.state_.dsams[p.concept_id] = std::move(p);
  }
  return engine;
}

} // namespace dsca
