#include "dsca/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dsca/parallel.hpp"

namespace dsca {

EditEvalSet build_eval_set(const WorldModel& world,
                           const std::vector<Sample>& edit_cases,
                           const EvalSetParams& params) {
  EditEvalSet out;
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  double sigma = params.perturb_scale > 0.0 ? params.perturb_scale
                                            : 0.5 * world.noise_scale;

  for (const Sample& s : edit_cases) {
    EditEvalSet::Case c;
    c.sample = s;
    c.target = s.target_class;
    for (int n = 0; n < params.neighbors_per_case; ++n) {
      Sample tn = s;
      for (double& v : tn.text) v += sigma * g(rng);
      tn.fused = fuse(tn.visual, tn.text);
      c.text_neighbors.push_back(std::move(tn));

      Sample vn = s;
      for (double& v : vn.visual) v += sigma * g(rng);
      vn.fused = fuse(vn.visual, vn.text);
      c.visual_neighbors.push_back(std::move(vn));
    }
    out.edit_cases.push_back(std::move(c));
  }

  int old_concepts = std::max(first_edit_concept(world), 1);
  for (int i = 0; i < params.unrelated_count; ++i) {
    Sample s = draw_sample(world, i % old_concepts, rng);
    s.split = "replay";
    s.target_class = s.ground_concept;
    out.unrelated_multimodal.push_back(s);

    Sample t = draw_sample(world, (i + 1) % old_concepts, rng);
    t.split = "replay";
    t.target_class = t.ground_concept;
    out.unrelated_text.push_back(std::move(t));
  }
  return out;
}

double reliability(const Engine& engine, const std::vector<EditEvalSet::Case>& cases) {
  if (cases.empty()) throw std::invalid_argument("reliability: no cases");
  std::vector<char> hit(cases.size(), 0);
  parallel_for(cases.size(), [&](size_t i) {
    Engine::Inference inf = engine.edit_inference(cases[i].sample);
    hit[i] = head_argmax(engine.head(), inf.edited) == cases[i].target;
  });
  long total = 0;
  for (char h : hit) total += h;
  return static_cast<double>(total) / cases.size();
}

double generalization(const Engine& engine,
                      const std::vector<EditEvalSet::Case>& cases, NeighborKind kind) {
  if (cases.empty()) throw std::invalid_argument("generalization: no cases");
  std::vector<std::pair<const Sample*, int>> probes;
  for (const auto& c : cases) {
    const std::vector<Sample>& neigh =
        kind == NeighborKind::text ? c.text_neighbors : c.visual_neighbors;
    if (neigh.empty())
      throw std::invalid_argument("generalization: case without neighbors");
    for (const Sample& s : neigh) probes.emplace_back(&s, c.target);
  }
  std::vector<char> hit(probes.size(), 0);
  parallel_for(probes.size(), [&](size_t i) {
    Engine::Inference inf = engine.edit_inference(*probes[i].first);
    hit[i] = head_argmax(engine.head(), inf.edited) == probes[i].second;
  });
  long total = 0;
  for (char h : hit) total += h;
  return static_cast<double>(total) / probes.size();
}

namespace {

int argmax_under(const Engine& engine, const Sample& s, LocalityKind kind) {
  Sample probe = s;
  if (kind == LocalityKind::text) {
    // Text-only pathway: no visual evidence, so routing sees no candidates.
    probe.visual.assign(probe.visual.size(), 0.0);
    probe.fused = fuse(probe.visual, probe.text);
  }
  Engine::Inference inf = engine.edit_inference(probe);
  return head_argmax(engine.head(), inf.edited);
}

} // namespace

double locality(const Engine& edited, const Engine& baseline,
                const std::vector<Sample>& unrelated, LocalityKind kind) {
  if (unrelated.empty()) throw std::invalid_argument("locality: no cases");
  if (edited.world().d_f != baseline.world().d_f ||
      edited.world().num_concepts != baseline.world().num_concepts ||
      edited.world().seed != baseline.world().seed)
    throw std::invalid_argument("locality: snapshots built for different worlds");

  std::vector<char> same(unrelated.size(), 0);
  parallel_for(unrelated.size(), [&](size_t i) {
    same[i] = argmax_under(edited, unrelated[i], kind) ==
              argmax_under(baseline, unrelated[i], kind);
  });
  long total = 0;
  for (char s : same) total += s;
  return static_cast<double>(total) / unrelated.size();
}

ContinualMetrics cl_metrics(const AccuracyMatrix& m) {
  const int t = m.a.rows;
  require(m.a.rows == m.a.cols, "cl_metrics: accuracy matrix must be square");
  if (t < 2) throw std::invalid_argument("cl_metrics: BWT/FWT need T >= 2 tasks");
  require(static_cast<int>(m.zero_shot.size()) == t,
          "cl_metrics: zero_shot length mismatch");

  ContinualMetrics out;
  for (int i = 0; i < t; ++i) out.acc += m.a.at(t - 1, i);
  out.acc /= t;

  for (int i = 0; i < t - 1; ++i) out.bwt += m.a.at(t - 1, i) - m.a.at(i, i);
  out.bwt /= (t - 1);

  for (int i = 1; i < t; ++i) out.fwt += m.a.at(i - 1, i) - m.zero_shot[i];
  out.fwt /= (t - 1);

  for (int i = 0; i < t; ++i) out.a_t += m.a.at(i, i);
  out.a_t /= t;
  return out;
}

SparsityReport sparsity_report(const std::vector<RoutingDecision>& decisions) {
  SparsityReport rep;
  for (int i = 0; i <= 20; ++i) rep.bin_edges.push_back(0.05 * i);
  rep.counts.assign(20, 0);

  long active = 0;
  for (const RoutingDecision& d : decisions) {
    int k = std::max(d.k_total, static_cast<int>(d.candidates.size()));
    long zeros = k;
    for (const auto& [id, w] : d.weights) {
      (void)id;
      int bin = std::min(19, static_cast<int>(w / 0.05));
      rep.counts[bin] += 1;
      if (w > 0.05) ++active;
      --zeros;
    }
    rep.counts[0] += zeros;  // all non-candidates are exact zeros
    rep.total_weights += k;
  }
  if (rep.total_weights > 0) {
    rep.fraction_below_005 =
        static_cast<double>(rep.counts[0]) / rep.total_weights;
    rep.mean_active = decisions.empty()
                          ? 0.0
                          : static_cast<double>(active) / decisions.size();
  }
  return rep;
}

} // namespace dsca
