#include "doctest.h"

#include <cmath>
#include <random>

#include "dsca/gradcheck.hpp"
#include "dsca/losses.hpp"
#include "oracles.hpp"

using namespace dsca;

TEST_CASE("loss_task") {
  TaskHead head;
  head.weights = Mat(4, 4);
  for (int i = 0; i < 4; ++i) head.weights.at(i, i) = 1.0;

  SUBCASE("uniform logits give log C") {
    Vec h(4, 0.0);
    CHECK(loss_task(h, 2, head) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  }

  SUBCASE("saturated target logit gives near-zero loss") {
    Vec h(4, 0.0);
    h[1] = 50.0;
    CHECK(loss_task(h, 1, head) <= 1e-20);
  }

  SUBCASE("random logits match the scalar log-sum-exp oracle") {
    std::mt19937_64 rng(301);
    TaskHead rh;
    rh.weights = Mat(6, 9);
    for (double& v : rh.weights.a) v = oracle::random_vec(1, rng)[0];
    for (int trial = 0; trial < 30; ++trial) {
      Vec h = oracle::random_vec(9, rng);
      int y = trial % 6;
      Vec logits = oracle::naive_matvec(rh.weights, h);
      double lse = 0.0;
      for (double l : logits) lse += std::exp(l);
      double want = std::log(lse) - logits[y];
      CHECK(loss_task(h, y, rh) == doctest::Approx(want).epsilon(1e-12));
      CHECK(loss_task(h, y, rh) >= 0.0);
    }
  }

  SUBCASE("invalid class throws") {
    Vec h(4, 0.0);
    CHECK_THROWS_AS(loss_task(h, 4, head), std::invalid_argument);
    CHECK_THROWS_AS(loss_task(h, -1, head), std::invalid_argument);
  }
}

TEST_CASE("loss_align") {
  std::mt19937_64 rng(307);
  Vec t = oracle::random_vec(8, rng);

  CHECK(loss_align(t, t) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(loss_align(scale(t, -2.0), t) == doctest::Approx(2.0).epsilon(1e-14));

  SUBCASE("random pair matches the dot/norms oracle and stays in [0,2]") {
    for (int trial = 0; trial < 50; ++trial) {
      Vec a = oracle::random_vec(8, rng), b = oracle::random_vec(8, rng);
      double want = 1.0 - oracle::naive_cosine(a, b);
      double got = loss_align(a, b);
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
      CHECK(got >= 0.0);
      CHECK(got <= 2.0);
    }
  }

  SUBCASE("zero vector throws") {
    CHECK_THROWS_AS(loss_align(Vec(8, 0.0), t), std::invalid_argument);
  }
}

TEST_CASE("loss_cdistill") {
  SUBCASE("perfect match with orthogonal negatives vanishes at small tau") {
    std::vector<Vec> teachers;
    for (int i = 0; i < 4; ++i) {
      Vec t(4, 0.0);
      t[i] = 1.0;
      teachers.push_back(t);
    }
    CHECK(loss_cdistill(teachers, teachers, 0.01) <= 1e-6);
  }

  SUBCASE("indistinguishable candidates give log 2") {
    Vec v{1.0, 2.0};
    std::vector<Vec> batch{v, v};
    CHECK(loss_cdistill(batch, batch, 0.07) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }

  SUBCASE("random batch matches the K x K similarity matrix oracle") {
    std::mt19937_64 rng(311);
    const int n = 8;
    std::vector<Vec> edited, teachers;
    for (int i = 0; i < n; ++i) {
      edited.push_back(oracle::random_vec(10, rng));
      teachers.push_back(oracle::random_vec(10, rng));
    }
    double got = loss_cdistill(edited, teachers, 0.07);

    double want = 0.0;
    for (int i = 0; i < n; ++i) {
      Vec sims(n);
      for (int j = 0; j < n; ++j)
        sims[j] = oracle::naive_cosine(edited[i], teachers[j]) / 0.07;
      Vec p = oracle::softmax(sims);
      want += -std::log(p[i]);
    }
    want /= n;
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }

  SUBCASE("batch below two throws") {
    std::vector<Vec> one{{1.0, 0.0}};
    CHECK_THROWS_AS(loss_cdistill(one, one, 0.07), std::invalid_argument);
  }
}

TEST_CASE("loss_sparse") {
  SUBCASE("empty decisions give zero") {
    std::vector<RoutingDecision> ds(5);
    CHECK(loss_sparse(ds) == 0.0);
  }

  SUBCASE("simplex weights give one") {
    std::vector<RoutingDecision> ds;
    for (int i = 0; i < 4; ++i) {
      RoutingDecision d;
      d.weights[0] = 0.25;
      d.weights[1] = 0.75;
      ds.push_back(d);
    }
    CHECK(loss_sparse(ds) == doctest::Approx(1.0).epsilon(1e-14));
  }

  SUBCASE("mixed batch matches the direct sum") {
    std::vector<RoutingDecision> ds(3);
    ds[0].weights[0] = 0.2;
    ds[0].weights[3] = 0.8;
    ds[1].weights[1] = 1.0;
    // ds[2] stays empty
    CHECK(loss_sparse(ds) == doctest::Approx((1.0 + 1.0 + 0.0) / 3.0).epsilon(1e-14));

    SUBCASE("logit variant sums |z| instead") {
      ds[0].logits[0] = -3.0;
      ds[0].logits[3] = 5.0;
      CHECK(loss_sparse(ds, true) == doctest::Approx(8.0 / 3.0).epsilon(1e-14));
    }
  }
}

TEST_CASE("total_loss composition") {
  GradcheckState st = make_gradcheck_state(1234);

  SUBCASE("all lambdas zero reduces to the task term") {
    LossWeights w = st.weights;
    w.lambda_align = w.lambda_distill = w.lambda_sparse = 0.0;
    LossBreakdown bd = total_loss(st.edit_batch, st.replay_batch, st.concepts,
                                  st.bases, st.dsams, st.head, w, st.options);
    CHECK(bd.total == doctest::Approx(bd.task).epsilon(1e-15));
  }

  SUBCASE("breakdown recombines to the weighted total") {
    LossWeights w = st.weights;
    w.lambda_align = 0.5;
    w.lambda_distill = 1.0;
    w.lambda_sparse = 1e-2;
    LossBreakdown bd = total_loss(st.edit_batch, st.replay_batch, st.concepts,
                                  st.bases, st.dsams, st.head, w, st.options);
    double recombined = bd.task + 0.5 * bd.align + 1.0 * bd.cdistill + 1e-2 * bd.sparse;
    CHECK(std::abs(bd.total - recombined) <= 1e-12);
  }

  SUBCASE("no-op DSAMs reproduce the identity-edit distillation value") {
    GradcheckState noop = st;
    for (auto& [id, p] : noop.dsams) {
      p = make_noop_params(noop.bases.at(id), p.bottleneck, 50 + id);
    }
    LossBreakdown bd =
        total_loss(noop.edit_batch, noop.replay_batch, noop.concepts, noop.bases,
                   noop.dsams, noop.head, noop.weights, noop.options);
    std::vector<Vec> teachers;
    for (const Sample& s : noop.replay_batch) teachers.push_back(s.fused);
    double want = loss_cdistill(teachers, teachers, noop.weights.tau_distill);
    CHECK(bd.cdistill == doctest::Approx(want).epsilon(1e-12));
  }

  SUBCASE("preconditions") {
    CHECK_THROWS_AS(total_loss({}, st.replay_batch, st.concepts, st.bases,
                               st.dsams, st.head, st.weights, st.options),
                    std::invalid_argument);
    std::vector<Sample> one{st.replay_batch[0]};
    CHECK_THROWS_AS(total_loss(st.edit_batch, one, st.concepts, st.bases,
                               st.dsams, st.head, st.weights, st.options),
                    std::invalid_argument);
  }
}

TEST_CASE("backward agrees with central finite differences") {
  // 100 sampled coordinates per tensor across two random states.
  for (uint64_t seed : {11ULL, 12ULL}) {
    GradcheckState st = make_gradcheck_state(seed);
    GradcheckReport rep = run_gradcheck(st, 100, seed * 31, false);
    INFO("seed ", seed, " worst rel err ", rep.worst_rel_err);
    CHECK(rep.pass);
    CHECK(rep.worst_rel_err <= 1e-4);
  }
}

TEST_CASE("alternate loss forms also pass finite differences") {
  GradcheckState st = make_gradcheck_state(21);
  st.weights.align_visual_form = true;
  st.weights.sparse_on_logits = true;
  GradcheckReport rep = run_gradcheck(st, 60, 77, false);
  INFO("worst rel err ", rep.worst_rel_err);
  CHECK(rep.pass);
}

TEST_CASE("corrupted gradient is caught (negative control)") {
  GradcheckState st = make_gradcheck_state(77);
  GradcheckReport rep = run_gradcheck(st, 40, 7, true);
  CHECK(!rep.pass);
}

TEST_CASE("direct finite difference on one coordinate") {
  // Independent of the gradcheck module: perturb W[0,0] of one DSAM by hand.
  GradcheckState st = make_gradcheck_state(99);
  ForwardTrace trace;
  total_loss(st.edit_batch, st.replay_batch, st.concepts, st.bases, st.dsams,
             st.head, st.weights, st.options, &trace);
  auto grads = backward(trace, st.bases, st.dsams, st.head, st.weights);
  double analytic = grads.at(0).W.at(0, 0);

  const double h = 1e-5;
  double saved = st.dsams.at(0).W.at(0, 0);
  st.dsams.at(0).W.at(0, 0) = saved + h;
  double up = total_loss(st.edit_batch, st.replay_batch, st.concepts, st.bases,
                         st.dsams, st.head, st.weights, st.options)
                  .total;
  st.dsams.at(0).W.at(0, 0) = saved - h;
  double down = total_loss(st.edit_batch, st.replay_batch, st.concepts, st.bases,
                           st.dsams, st.head, st.weights, st.options)
                    .total;
  st.dsams.at(0).W.at(0, 0) = saved;
  double numeric = (up - down) / (2.0 * h);
  CHECK(analytic == doctest::Approx(numeric).epsilon(1e-5));
}

TEST_CASE("gradients vanish at loss stationary points") {
  SUBCASE("saturated correct edit with task loss only") {
    GradcheckState st = make_gradcheck_state(55);
    st.weights.lambda_align = st.weights.lambda_distill = st.weights.lambda_sparse = 0.0;
    // One edit sample, no-op DSAMs (edited == fused), and a head whose
    // target row points along the sample with a huge margin: the softmax
    // saturates and every gradient dies.
    for (auto& [id, p] : st.dsams)
      p = make_noop_params(st.bases.at(id), p.bottleneck, 70 + id);
    st.edit_batch.resize(1);
    Sample& s = st.edit_batch[0];
    s.target_class = 2;
    st.head.weights = Mat(6, 32);
    double nf = norm2(s.fused);
    for (int j = 0; j < 32; ++j) st.head.weights.at(2, j) = 50.0 * s.fused[j] / (nf * nf);
    ForwardTrace trace;
    total_loss(st.edit_batch, st.replay_batch, st.concepts, st.bases, st.dsams,
               st.head, st.weights, st.options, &trace);
    auto grads = backward(trace, st.bases, st.dsams, st.head, st.weights);
    for (const auto& [id, g] : grads) {
      double n = 0.0;
      for (double v : g.W.a) n += v * v;
      for (double v : g.b) n += v * v;
      CHECK(std::sqrt(n) <= 1e-8);
    }
  }

  SUBCASE("align gradient is zero when the edit already matches the text") {
    GradcheckState st = make_gradcheck_state(56);
    st.weights.lambda_distill = st.weights.lambda_sparse = 0.0;
    st.weights.lambda_align = 1.0;
    // No-op DSAMs make edited == fused; set text == fused for a cosine
    // critical point. Kill the task gradient with a zero head.
    for (auto& [id, p] : st.dsams)
      p = make_noop_params(st.bases.at(id), p.bottleneck, 60 + id);
    st.head.weights = Mat(6, 32);
    for (Sample& s : st.edit_batch) s.text = s.fused;
    ForwardTrace trace;
    total_loss(st.edit_batch, st.replay_batch, st.concepts, st.bases, st.dsams,
               st.head, st.weights, st.options, &trace);
    auto grads = backward(trace, st.bases, st.dsams, st.head, st.weights);
    for (const auto& [id, g] : grads) {
      for (double v : g.W.a) CHECK(std::abs(v) <= 1e-12);
      for (double v : g.b) CHECK(std::abs(v) <= 1e-12);
      for (double v : g.gate_b) CHECK(std::abs(v) <= 1e-12);
    }
  }
}

TEST_CASE("sgd_step") {
  GradcheckState st = make_gradcheck_state(42);
  const DsamParams& p = st.dsams.at(0);

  SUBCASE("zero gradient leaves parameters unchanged") {
    DsamGrads g = zero_grads_like(p);
    DsamParams out = sgd_step(p, g, 0.1);
    CHECK(out.W.a == p.W.a);
    CHECK(out.gate_b == p.gate_b);
  }

  SUBCASE("lr one with grad equal to params zeroes them") {
    DsamGrads g;
    g.W = p.W;
    g.b = p.b;
    g.gate_U = p.gate_U;
    g.gate_V = p.gate_V;
    g.gate_b = p.gate_b;
    DsamParams out = sgd_step(p, g, 1.0);
    for (double v : out.W.a) CHECK(v == 0.0);
    for (double v : out.gate_b) CHECK(v == 0.0);
  }

  SUBCASE("random step matches element-wise subtraction") {
    std::mt19937_64 rng(5);
    DsamGrads g = zero_grads_like(p);
    for (double& v : g.W.a) v = oracle::random_vec(1, rng)[0];
    DsamParams out = sgd_step(p, g, 0.03);
    for (size_t i = 0; i < p.W.a.size(); ++i)
      CHECK(out.W.a[i] == doctest::Approx(p.W.a[i] - 0.03 * g.W.a[i]).epsilon(1e-15));
  }

  SUBCASE("non-finite gradient throws with a diagnostic") {
    DsamGrads g = zero_grads_like(p);
    g.gate_V.at(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(sgd_step(p, g, 0.1),
                         doctest::Contains("gate_V"), std::runtime_error);
  }
}

TEST_CASE("two hundred SGD steps cut the task loss by ninety percent") {
  // Tiny fixed problem: one concept, one edit sample, task loss only.
  std::mt19937_64 rng(61);
  const int d = 16, r = 4;
  SubspaceBasis basis;
  basis.concept_id = 0;
  basis.rank = r;
  basis.rows = oracle::random_orthonormal(r, d, rng);
  basis.mean.assign(d, 0.0);
  basis.singular_values.assign(r, 1.0);
  basis.n_seen = 32;
  basis.version = 1;
  basis.active = true;

  Concept cluster;
  cluster.id = 0;
  cluster.proto_fused = oracle::random_vec(d, rng);
  cluster.proto_visual = cluster.proto_fused;
  cluster.dsam_active = true;

  GradcheckState st;
  st.concepts = {cluster};
  st.bases[0] = basis;
  st.dsams[0] = make_noop_params(basis, 4, 17);
  st.head.weights = Mat(5, d);
  for (double& v : st.head.weights.a) v = oracle::random_vec(1, rng)[0];

  Sample s;
  s.visual = cluster.proto_visual;
  s.text = cluster.proto_fused;
  s.fused = fuse(s.visual, s.text);
  s.target_class = 3;
  s.split = "edit";
  st.edit_batch = {s};
  Sample r1 = s, r2 = s;
  r1.fused[0] += 0.5;
  r2.fused[1] -= 0.5;
  st.replay_batch = {r1, r2};
  st.weights.lambda_align = st.weights.lambda_distill = st.weights.lambda_sparse = 0.0;
  st.options.router.tau_visual = -0.5;

  double initial = -1.0, current = 0.0;
  SgdOptimizer opt(0.5, 0.0);
  for (int step = 0; step < 200; ++step) {
    ForwardTrace trace;
    LossBreakdown bd =
        total_loss(st.edit_batch, st.replay_batch, st.concepts, st.bases,
                   st.dsams, st.head, st.weights, st.options, &trace);
    if (initial < 0.0) initial = bd.task;
    current = bd.task;
    auto grads = backward(trace, st.bases, st.dsams, st.head, st.weights);
    opt.step(st.dsams, grads);
  }
  CHECK(current <= 0.1 * initial);
}
