#include "dsca/losses.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dsca {

void LossWeights::validate() const {
  if (lambda_align < 0.0 || lambda_distill < 0.0 || lambda_sparse < 0.0)
    throw std::invalid_argument("loss weights must be nonnegative");
  if (tau_distill <= 0.0)
    throw std::invalid_argument("tau_distill must be > 0");
}

double loss_task(const Vec& edited, int target_class, const TaskHead& head) {
  Vec logits = head_logits(head, edited);
  if (target_class < 0 || target_class >= static_cast<int>(logits.size()))
    throw std::invalid_argument("loss_task: invalid class index");
  double mx = *std::max_element(logits.begin(), logits.end());
  double lse = 0.0;
  for (double l : logits) lse += std::exp(l - mx);
  return std::log(lse) + mx - logits[target_class];
}

double loss_align(const Vec& edited, const Vec& text) {
  return 1.0 - cosine(edited, text);
}

double loss_cdistill(const std::vector<Vec>& edited_batch,
                     const std::vector<Vec>& teacher_batch, double tau) {
  if (edited_batch.size() != teacher_batch.size())
    throw std::invalid_argument("loss_cdistill: batch length mismatch");
  const int n = static_cast<int>(edited_batch.size());
  if (n < 2) throw std::invalid_argument("loss_cdistill: batch must have >= 2 samples");
  if (tau <= 0.0) throw std::invalid_argument("loss_cdistill: tau must be > 0");

  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec sims(n);
    for (int j = 0; j < n; ++j)
      sims[j] = cosine(edited_batch[i], teacher_batch[j]) / tau;
    double mx = *std::max_element(sims.begin(), sims.end());
    double lse = 0.0;
    for (double s : sims) lse += std::exp(s - mx);
    total += std::log(lse) + mx - sims[i];
  }
  return total / n;
}

double loss_sparse(const std::vector<RoutingDecision>& decisions, bool on_logits) {
  if (decisions.empty()) return 0.0;
  double total = 0.0;
  for (const RoutingDecision& d : decisions) {
    if (on_logits) {
      for (const auto& [id, z] : d.logits) total += std::abs(z);
    } else {
      for (const auto& [id, w] : d.weights) total += std::abs(w);
    }
  }
  return total / static_cast<double>(decisions.size());
}

SampleCache forward_sample(const Sample& s, const std::vector<Concept>& concepts,
                           const std::map<int, SubspaceBasis>& bases,
                           const std::map<int, DsamParams>& dsams,
                           const ForwardOptions& opt) {
  SampleCache cache;
  cache.h_f = s.fused;
  cache.visual = s.visual;
  cache.text = s.text;
  cache.target_class = s.target_class;

  std::vector<int> candidates;
  if (opt.single_stage) {
    for (const Concept& c : concepts) candidates.push_back(c.id);
  } else if (norm2(s.visual) > 0.0) {
    candidates = coarse_filter(s.visual, concepts, opt.router);
  }
  cache.decision = route(s.fused, candidates, concepts, opt.router);

  bool touched = false;
  Vec edited;
  for (const auto& [id, w] : cache.decision.weights) {
    if (w == 0.0) continue;
    auto pit = dsams.find(id);
    auto bit = bases.find(id);
    if (pit == dsams.end() || bit == bases.end() || !bit->second.active) continue;
    const DsamParams& p = pit->second;
    const SubspaceBasis& basis = bit->second;

    CandidateCache cc;
    cc.id = id;
    cc.weight = w;
    cc.bottleneck_in = matvec(p.gate_V, s.fused);
    Vec pre = matvec(p.gate_U, cc.bottleneck_in);
    cc.gate_values.resize(pre.size());
    for (size_t i = 0; i < pre.size(); ++i)
      cc.gate_values[i] = 1.0 / (1.0 + std::exp(-(pre[i] + p.gate_b[i])));

    Vec a = matvec(p.W, s.fused);
    axpy(1.0, p.b, a);
    if (opt.basis_residual) {
      Vec cur = matvec(basis.rows, s.fused);
      for (int i = 0; i < basis.rank; ++i) a[i] -= cur[i];
    }
    cc.lifted = matvec_t(basis.rows, a);

    if (!touched) {
      edited = s.fused;
      touched = true;
    }
    for (size_t i = 0; i < edited.size(); ++i)
      edited[i] += w * cc.gate_values[i] * cc.lifted[i];
    cache.contribs.push_back(std::move(cc));
  }
  cache.edited = touched ? std::move(edited) : s.fused;
  return cache;
}

LossBreakdown total_loss(const std::vector<Sample>& edit_batch,
                         const std::vector<Sample>& replay_batch,
                         const std::vector<Concept>& concepts,
                         const std::map<int, SubspaceBasis>& bases,
                         const std::map<int, DsamParams>& dsams,
                         const TaskHead& head, const LossWeights& weights,
                         const ForwardOptions& opt, ForwardTrace* trace) {
  weights.validate();
  if (edit_batch.empty())
    throw std::invalid_argument("total_loss: edit batch must be nonempty");
  if (replay_batch.size() < 2)
    throw std::invalid_argument("total_loss: replay batch must have >= 2 samples");

  ForwardTrace local;
  ForwardTrace& t = trace ? *trace : local;
  t.edit.clear();
  t.replay.clear();
  t.teachers.clear();

  LossBreakdown out;
  for (const Sample& s : edit_batch) {
    SampleCache c = forward_sample(s, concepts, bases, dsams, opt);
    out.task += loss_task(c.edited, s.target_class, head);
    if (weights.align_visual_form) {
      Vec delta = sub(c.edited, c.h_f);
      out.align += loss_align(add(c.visual, delta), c.text);
    } else {
      out.align += loss_align(c.edited, c.text);
    }
    t.edit.push_back(std::move(c));
  }
  out.task /= static_cast<double>(edit_batch.size());
  out.align /= static_cast<double>(edit_batch.size());

  std::vector<Vec> edited_replay, teachers;
  std::vector<RoutingDecision> decisions;
  for (const Sample& s : replay_batch) {
    SampleCache c = forward_sample(s, concepts, bases, dsams, opt);
    edited_replay.push_back(c.edited);
    teachers.push_back(teacher_fused(s));
    decisions.push_back(c.decision);
    t.replay.push_back(std::move(c));
  }
  t.teachers = teachers;
  out.cdistill = loss_cdistill(edited_replay, teachers, weights.tau_distill);
  out.sparse = loss_sparse(decisions, weights.sparse_on_logits);

  out.total = out.task + weights.lambda_align * out.align +
              weights.lambda_distill * out.cdistill +
              weights.lambda_sparse * out.sparse;
  return out;
}

DsamGrads zero_grads_like(const DsamParams& p) {
  DsamGrads g;
  g.W = Mat(p.W.rows, p.W.cols);
  g.b.assign(p.b.size(), 0.0);
  g.gate_U = Mat(p.gate_U.rows, p.gate_U.cols);
  g.gate_V = Mat(p.gate_V.rows, p.gate_V.cols);
  g.gate_b.assign(p.gate_b.size(), 0.0);
  return g;
}

namespace {

// d cos(e, t) / d e  =  (t_hat - cos * e_hat) / ||e||
Vec cosine_grad_wrt_first(const Vec& e, const Vec& t) {
  double ne = norm2(e), nt = norm2(t);
  require(ne > 0.0 && nt > 0.0, "cosine gradient: zero-norm vector");
  double cos = dot(e, t) / (ne * nt);
  Vec g(e.size());
  for (size_t i = 0; i < e.size(); ++i)
    g[i] = (t[i] / nt - cos * e[i] / ne) / ne;
  return g;
}

// Push the adjoint of the edited vector into one candidate's parameters.
void backprop_sample(const SampleCache& c, const Vec& adjoint,
                     const std::map<int, SubspaceBasis>& bases,
                     const std::map<int, DsamParams>& dsams,
                     std::map<int, DsamGrads>& grads) {
  for (const CandidateCache& cc : c.contribs) {
    const SubspaceBasis& basis = bases.at(cc.id);
    const DsamParams& p = dsams.at(cc.id);
    DsamGrads& g = grads[cc.id];
    if (g.W.empty()) g = zero_grads_like(p);

    const int d = basis.dim();
    // dL/dPsi_k = w_k * adjoint
    Vec d_psi(d);
    for (int i = 0; i < d; ++i) d_psi[i] = cc.weight * adjoint[i];

    // Through the element-wise product Psi = g (.) lifted.
    Vec d_lifted(d), d_gate(d);
    for (int i = 0; i < d; ++i) {
      d_lifted[i] = d_psi[i] * cc.gate_values[i];
      d_gate[i] = d_psi[i] * cc.lifted[i];
    }

    // lifted = R^T a, a = W h + b (- R h, constant in the parameters)
    Vec d_a = matvec(basis.rows, d_lifted);
    for (int i = 0; i < basis.rank; ++i) {
      g.b[i] += d_a[i];
      double* wrow = g.W.row(i);
      for (int j = 0; j < d; ++j) wrow[j] += d_a[i] * c.h_f[j];
    }

    // gate = sigmoid(U v + gate_b), v = V h
    Vec d_pre(d);
    for (int i = 0; i < d; ++i)
      d_pre[i] = d_gate[i] * cc.gate_values[i] * (1.0 - cc.gate_values[i]);
    for (int i = 0; i < d; ++i) {
      g.gate_b[i] += d_pre[i];
      double* urow = g.gate_U.row(i);
      for (int j = 0; j < p.bottleneck; ++j)
        urow[j] += d_pre[i] * cc.bottleneck_in[j];
    }
    Vec d_v = matvec_t(p.gate_U, d_pre);  // bottleneck
    for (int i = 0; i < p.bottleneck; ++i) {
      double* vrow = g.gate_V.row(i);
      for (int j = 0; j < d; ++j) vrow[j] += d_v[i] * c.h_f[j];
    }
  }
}

} // namespace

std::map<int, DsamGrads> backward(const ForwardTrace& trace,
                                  const std::map<int, SubspaceBasis>& bases,
                                  const std::map<int, DsamParams>& dsams,
                                  const TaskHead& head, const LossWeights& weights) {
  std::map<int, DsamGrads> grads;
  for (const auto& [id, p] : dsams) grads[id] = zero_grads_like(p);

  const double n_edit = static_cast<double>(trace.edit.size());
  for (const SampleCache& c : trace.edit) {
    Vec adjoint(c.h_f.size(), 0.0);

    // Task: softmax cross-entropy through the frozen head.
    Vec logits = head_logits(head, c.edited);
    double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    Vec p_soft(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) p_soft[i] = std::exp(logits[i] - mx) / z;
    p_soft[c.target_class] -= 1.0;
    Vec g_task = matvec_t(head.weights, p_soft);
    axpy(1.0 / n_edit, g_task, adjoint);

    // Align: 1 - cos, either on the edited fused vector or on h_v + delta.
    // Both depend on the parameters only through delta, so the adjoint adds
    // straight onto the edited-vector adjoint.
    if (weights.lambda_align > 0.0) {
      Vec base = weights.align_visual_form
                     ? add(c.visual, sub(c.edited, c.h_f))
                     : c.edited;
      Vec dcos = cosine_grad_wrt_first(base, c.text);
      axpy(-weights.lambda_align / n_edit, dcos, adjoint);
    }

    backprop_sample(c, adjoint, bases, dsams, grads);
  }

  // InfoNCE distillation over the replay batch.
  const int nb = static_cast<int>(trace.replay.size());
  if (nb >= 2 && weights.lambda_distill > 0.0) {
    const double tau = weights.tau_distill;
    for (int i = 0; i < nb; ++i) {
      const SampleCache& c = trace.replay[i];
      Vec sims(nb);
      for (int j = 0; j < nb; ++j)
        sims[j] = cosine(c.edited, trace.teachers[j]) / tau;
      double mx = *std::max_element(sims.begin(), sims.end());
      double z = 0.0;
      for (double s : sims) z += std::exp(s - mx);

      Vec adjoint(c.h_f.size(), 0.0);
      for (int j = 0; j < nb; ++j) {
        double p_ij = std::exp(sims[j] - mx) / z;
        double coeff = (p_ij - (i == j ? 1.0 : 0.0)) / tau;
        Vec dcos = cosine_grad_wrt_first(c.edited, trace.teachers[j]);
        axpy(weights.lambda_distill * coeff / nb, dcos, adjoint);
      }
      backprop_sample(c, adjoint, bases, dsams, grads);
    }
  }
  // The sparsity term depends only on routing weights, which are constants
  // with respect to the trainable parameters; it contributes no gradient.
  return grads;
}

namespace {

void check_finite_grad(const char* tensor, const std::vector<double>& g, int concept_id) {
  for (size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) {
      std::ostringstream os;
      os << "sgd_step: non-finite gradient in " << tensor << " of DSAM "
         << concept_id << " at flat index " << i << " (value " << g[i] << ")";
      throw std::runtime_error(os.str());
    }
  }
}

} // namespace

DsamParams sgd_step(const DsamParams& params, const DsamGrads& grads, double lr) {
  require(lr > 0.0, "sgd_step: lr must be > 0");
  check_finite_grad("W", grads.W.a, params.concept_id);
  check_finite_grad("b", grads.b, params.concept_id);
  check_finite_grad("gate_U", grads.gate_U.a, params.concept_id);
  check_finite_grad("gate_V", grads.gate_V.a, params.concept_id);
  check_finite_grad("gate_b", grads.gate_b, params.concept_id);

  DsamParams out = params;
  for (size_t i = 0; i < out.W.a.size(); ++i) out.W.a[i] -= lr * grads.W.a[i];
  for (size_t i = 0; i < out.b.size(); ++i) out.b[i] -= lr * grads.b[i];
  for (size_t i = 0; i < out.gate_U.a.size(); ++i) out.gate_U.a[i] -= lr * grads.gate_U.a[i];
  for (size_t i = 0; i < out.gate_V.a.size(); ++i) out.gate_V.a[i] -= lr * grads.gate_V.a[i];
  for (size_t i = 0; i < out.gate_b.size(); ++i) out.gate_b[i] -= lr * grads.gate_b[i];
  return out;
}

void SgdOptimizer::step(std::map<int, DsamParams>& params,
                        const std::map<int, DsamGrads>& grads) {
  for (auto& [id, p] : params) {
    auto git = grads.find(id);
    if (git == grads.end()) continue;
    const DsamGrads& g = git->second;
    if (momentum_ <= 0.0) {
      p = sgd_step(p, g, lr_);
      continue;
    }
    auto vit = velocity_.find(id);
    if (vit == velocity_.end()) vit = velocity_.emplace(id, zero_grads_like(p)).first;
    DsamGrads& v = vit->second;
    auto blend = [&](std::vector<double>& vel, const std::vector<double>& grad) {
      for (size_t i = 0; i < vel.size(); ++i)
        vel[i] = momentum_ * vel[i] + grad[i];
    };
    blend(v.W.a, g.W.a);
    blend(v.b, g.b);
    blend(v.gate_U.a, g.gate_U.a);
    blend(v.gate_V.a, g.gate_V.a);
    blend(v.gate_b, g.gate_b);
    p = sgd_step(p, v, lr_);
  }
}

} // namespace dsca
