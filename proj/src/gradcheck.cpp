#include "dsca/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dsca {

namespace {

Mat random_orthonormal_rows(int r, int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat m(r, d);
  for (double& v : m.a) v = g(rng);
  orthonormalize_rows(m);
  return m;
}

} // namespace

GradcheckState make_gradcheck_state(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);

  const int d = 32, r = 4, bottleneck = 8, k = 3, num_classes = 6;
  GradcheckState st;

  st.head.weights = Mat(num_classes, d);
  for (double& v : st.head.weights.a) v = 0.4 * g(rng);

  for (int c = 0; c < k; ++c) {
    Vec proto_v(d), proto_f(d);
    for (int i = 0; i < d; ++i) {
      proto_v[i] = g(rng);
      proto_f[i] = g(rng);
    }
    Concept cluster;
    cluster.id = c;
    cluster.proto_visual = proto_v;
    cluster.proto_fused = proto_f;
    cluster.dist_mean = 1.0;
    cluster.dist_std = 0.5;
    cluster.dsam_active = true;
    st.concepts.push_back(cluster);

    SubspaceBasis basis;
    basis.concept_id = c;
    basis.rank = r;
    basis.rows = random_orthonormal_rows(r, d, rng);
    basis.mean.assign(d, 0.0);
    basis.singular_values.assign(r, 1.0);
    basis.n_seen = 64;
    basis.version = 1;
    basis.active = true;
    st.bases[c] = basis;

    DsamParams p;
    p.concept_id = c;
    p.bottleneck = bottleneck;
    p.W = Mat(r, d);
    for (double& v : p.W.a) v = 0.3 * g(rng);
    p.b.resize(r);
    for (double& v : p.b) v = 0.3 * g(rng);
    p.gate_U = Mat(d, bottleneck);
    for (double& v : p.gate_U.a) v = 0.3 * g(rng);
    p.gate_V = Mat(bottleneck, d);
    for (double& v : p.gate_V.a) v = 0.3 * g(rng);
    p.gate_b.resize(d);
    for (double& v : p.gate_b) v = 0.2 * g(rng);
    st.dsams[c] = p;
  }

  // Samples near the prototypes so both routing stages keep candidates.
  std::uniform_int_distribution<int> pick_concept(0, k - 1);
  std::uniform_int_distribution<int> pick_class(0, num_classes - 1);
  auto draw = [&](bool edit) {
    int c = pick_concept(rng);
    Sample s;
    s.visual.resize(d);
    s.text.resize(d);
    for (int i = 0; i < d; ++i) {
      s.visual[i] = st.concepts[c].proto_visual[i] + 0.2 * g(rng);
      s.text[i] = st.concepts[c].proto_fused[i] + 0.2 * g(rng);
    }
    s.fused = fuse(s.visual, s.text);
    s.ground_concept = c;
    s.target_class = pick_class(rng);
    s.split = edit ? "edit" : "replay";
    return s;
  };
  for (int i = 0; i < 3; ++i) st.edit_batch.push_back(draw(true));
  for (int i = 0; i < 5; ++i) st.replay_batch.push_back(draw(false));

  st.weights.lambda_align = 0.5;
  st.weights.lambda_distill = 1.0;
  st.weights.lambda_sparse = 1e-2;
  st.weights.tau_distill = 0.07;
  st.options.router.tau = 0.07;
  st.options.router.tau_visual = -0.5;  // keep every concept in the candidate set
  return st;
}

namespace {

struct TensorRef {
  int concept_id;
  const char* name;
  std::vector<double>* param;
  const std::vector<double>* grad;
};

double eval_total(const GradcheckState& st) {
  return total_loss(st.edit_batch, st.replay_batch, st.concepts, st.bases,
                    st.dsams, st.head, st.weights, st.options)
      .total;
}

} // namespace

GradcheckReport run_gradcheck(const GradcheckState& state, int coords_per_tensor,
                              uint64_t seed, bool corrupt) {
  GradcheckState st = state;  // perturbed in place by the FD loop

  ForwardTrace trace;
  total_loss(st.edit_batch, st.replay_batch, st.concepts, st.bases, st.dsams,
             st.head, st.weights, st.options, &trace);
  std::map<int, DsamGrads> grads =
      backward(trace, st.bases, st.dsams, st.head, st.weights);

  if (corrupt && !grads.empty()) {
    // The first checked coordinate of every tensor is index 0, so this
    // corruption is always visible to the comparison below.
    DsamGrads& g = grads.begin()->second;
    if (!g.W.a.empty()) g.W.a[0] += 1.0;
  }

  std::vector<TensorRef> refs;
  for (auto& [id, p] : st.dsams) {
    DsamGrads& g = grads.at(id);
    refs.push_back({id, "W", &p.W.a, &g.W.a});
    refs.push_back({id, "b", &p.b, &g.b});
    refs.push_back({id, "gate_U", &p.gate_U.a, &g.gate_U.a});
    refs.push_back({id, "gate_V", &p.gate_V.a, &g.gate_V.a});
    refs.push_back({id, "gate_b", &p.gate_b, &g.gate_b});
  }

  const double step = 1e-5;
  std::mt19937_64 rng(seed);
  GradcheckReport rep;
  for (TensorRef& ref : refs) {
    GradcheckReport::TensorResult tr;
    tr.concept_id = ref.concept_id;
    tr.tensor = ref.name;

    const size_t n = ref.param->size();
    std::uniform_int_distribution<size_t> pick(0, n - 1);
    int coords = std::min<int>(coords_per_tensor, static_cast<int>(n));
    for (int c = 0; c < coords; ++c) {
      size_t idx = (c == 0 || coords >= static_cast<int>(n))
                       ? static_cast<size_t>(c)
                       : pick(rng);
      double saved = (*ref.param)[idx];
      (*ref.param)[idx] = saved + step;
      double up = eval_total(st);
      (*ref.param)[idx] = saved - step;
      double down = eval_total(st);
      (*ref.param)[idx] = saved;

      double numeric = (up - down) / (2.0 * step);
      double analytic = (*ref.grad)[idx];
      // The floor sits well above the cancellation noise of the central
      // difference itself (~2e-10 absolute at loss scale O(1), step 1e-5);
      // below it the comparison would measure FD roundoff, not the gradient.
      double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-5});
      double rel = std::abs(numeric - analytic) / denom;
      if (rel > tr.worst_rel_err) {
        tr.worst_rel_err = rel;
        tr.worst_index = idx;
        tr.analytic = analytic;
        tr.numeric = numeric;
      }
    }
    rep.worst_rel_err = std::max(rep.worst_rel_err, tr.worst_rel_err);
    rep.tensors.push_back(std::move(tr));
  }
  rep.pass = rep.worst_rel_err <= 1e-4;
  return rep;
}

GradcheckReport run_gradcheck_suite(int num_states, uint64_t seed, bool corrupt) {
  GradcheckReport all;
  all.pass = true;
  for (int s = 0; s < num_states; ++s) {
    GradcheckState st = make_gradcheck_state(seed + 1000ULL * s);
    GradcheckReport rep = run_gradcheck(st, 20, seed + 7ULL * s, corrupt && s == 0);
    all.worst_rel_err = std::max(all.worst_rel_err, rep.worst_rel_err);
    all.pass = all.pass && rep.pass;
    for (auto& t : rep.tensors) all.tensors.push_back(std::move(t));
  }
  return all;
}

} // namespace dsca
