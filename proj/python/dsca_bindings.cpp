// Python bindings for the core operations: world/stream generation, fusion,
// subspace construction and overlap diagnostics, DSAM interventions,
// continual-learning metrics, the gradient check, and whole experiments
// driven from a config JSON string.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dsca/config.hpp"
#include "dsca/experiment.hpp"
#include "dsca/gradcheck.hpp"

namespace py = pybind11;
using namespace dsca;

namespace {

Mat mat_from_rows(const std::vector<Vec>& rows) {
  if (rows.empty()) return Mat();
  Mat m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int i = 0; i < m.rows; ++i) {
    if (static_cast<int>(rows[i].size()) != m.cols)
      throw std::invalid_argument("rows must have equal length");
    for (int j = 0; j < m.cols; ++j) m.at(i, j) = rows[i][j];
  }
  return m;
}

std::vector<Vec> mat_to_rows(const Mat& m) {
  std::vector<Vec> rows;
  for (int i = 0; i < m.rows; ++i)
    rows.emplace_back(m.row(i), m.row(i) + m.cols);
  return rows;
}

py::dict experiment_result_to_dict(const ExperimentResult& res) {
  py::dict d;
  d["variant"] = res.variant;
  d["reliability"] = res.reliability;
  d["t_gen"] = res.t_gen;
  d["v_gen"] = res.v_gen;
  d["t_loc"] = res.t_loc;
  d["m_loc"] = res.m_loc;
  d["mean_overlap"] = res.mean_overlap;
  d["max_overlap"] = res.max_overlap;
  d["concepts"] = res.concepts;
  d["active_dsams"] = res.active_dsams;
  d["replay_weight_fraction_below_005"] = res.replay_sparsity.fraction_below_005;
  d["replay_mean_active_dsams"] = res.replay_sparsity.mean_active;
  if (res.continual) {
    d["acc"] = res.continual->acc;
    d["bwt"] = res.continual->bwt;
    d["fwt"] = res.continual->fwt;
    d["a_t"] = res.continual->a_t;
  }
  return d;
}

} // namespace

PYBIND11_MODULE(dsca_core, m) {
  m.doc() = "Lifelong representation editing in orthogonal concept subspaces";

  py::class_<WorldModel>(m, "World")
      .def_readonly("num_concepts", &WorldModel::num_concepts)
      .def_readonly("dim", &WorldModel::d_f)
      .def_readonly("noise_scale", &WorldModel::noise_scale)
      .def("fused_mean", &WorldModel::fused_mean)
      .def_readonly("means_v", &WorldModel::means_v)
      .def_readonly("means_t", &WorldModel::means_t);

  m.def(
      "make_world",
      [](int num_concepts, int dim, double noise_scale, uint64_t seed) {
        WorldParams p;
        p.num_concepts = num_concepts;
        p.dim = dim;
        p.noise_scale = noise_scale;
        p.seed = seed;
        return make_world(p);
      },
      py::arg("num_concepts"), py::arg("dim"), py::arg("noise_scale"),
      py::arg("seed"));

  py::class_<Sample>(m, "Sample")
      .def_readonly("visual", &Sample::visual)
      .def_readonly("text", &Sample::text)
      .def_readonly("fused", &Sample::fused)
      .def_readonly("ground_concept", &Sample::ground_concept)
      .def_readonly("target_class", &Sample::target_class)
      .def_readonly("split", &Sample::split);

  m.def("generate_stream", &generate_stream, py::arg("world"), py::arg("n_edit"),
        py::arg("n_replay"), py::arg("seed"));
  m.def("fuse", &fuse, py::arg("visual"), py::arg("text"));

  py::class_<SubspaceBasis>(m, "Subspace")
      .def_readonly("concept_id", &SubspaceBasis::concept_id)
      .def_readonly("rank", &SubspaceBasis::rank)
      .def_readonly("version", &SubspaceBasis::version)
      .def_property_readonly(
          "rows", [](const SubspaceBasis& b) { return mat_to_rows(b.rows); });

  m.def(
      "pca_init",
      [](const std::vector<Vec>& buffer, int r) { return pca_init(buffer, r, 0); },
      py::arg("buffer"), py::arg("rank"));
  m.def(
      "residualize",
      [](const Vec& h, const std::vector<SubspaceBasis>& earlier) {
        return residualize(h, earlier);
      },
      py::arg("h"), py::arg("earlier"));
  m.def("overlap", &overlap, py::arg("a"), py::arg("b"));
  m.def(
      "mean_overlap",
      [](const std::vector<SubspaceBasis>& all) {
        OverlapReport rep = mean_overlap(all);
        return py::make_tuple(rep.mean_overlap, rep.max_overlap);
      },
      py::arg("bases"));

  py::class_<DsamParams>(m, "DsamParams")
      .def_readonly("concept_id", &DsamParams::concept_id)
      .def_readonly("bottleneck", &DsamParams::bottleneck)
      .def_property_readonly("W",
                             [](const DsamParams& p) { return mat_to_rows(p.W); })
      .def_readonly("b", &DsamParams::b);

  m.def("make_noop_dsam", &make_noop_params, py::arg("basis"), py::arg("bottleneck"),
        py::arg("seed"));
  m.def("gate", &gate, py::arg("params"), py::arg("h"));
  m.def("raw_update", &raw_update, py::arg("params"), py::arg("basis"), py::arg("h"));
  m.def("intervene", &intervene, py::arg("params"), py::arg("basis"), py::arg("h"));

  m.def(
      "cl_metrics",
      [](const std::vector<Vec>& accuracy, const Vec& zero_shot) {
        AccuracyMatrix am;
        am.a = mat_from_rows(accuracy);
        am.zero_shot = zero_shot;
        ContinualMetrics r = cl_metrics(am);
        py::dict d;
        d["acc"] = r.acc;
        d["bwt"] = r.bwt;
        d["fwt"] = r.fwt;
        d["a_t"] = r.a_t;
        return d;
      },
      py::arg("accuracy_matrix"), py::arg("zero_shot"));

  m.def(
      "gradcheck",
      [](int states, uint64_t seed) {
        GradcheckReport rep = run_gradcheck_suite(states, seed);
        return py::make_tuple(rep.pass, rep.worst_rel_err);
      },
      py::arg("states") = 3, py::arg("seed") = 1);

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        ExperimentConfig cfg = parse_experiment_config(config_json);
        return experiment_result_to_dict(run_experiment(cfg));
      },
      py::arg("config_json"),
      "Run the sequential editing protocol for a config JSON string and "
      "return the final metrics.");

  m.def("default_config_json",
        []() { return experiment_config_to_json(desk_default_config()); });
  m.def("known_variants", &known_variants);
}
