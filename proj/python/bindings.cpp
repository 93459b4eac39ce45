#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "morph3d/error.hpp"
#include "morph3d/experiment.hpp"
#include "morph3d/matchers.hpp"
#include "morph3d/mesh_io.hpp"
#include "morph3d/metrics.hpp"
#include "morph3d/morphgen.hpp"
#include "morph3d/registration.hpp"
#include "morph3d/shape_model.hpp"
#include "morph3d/synth.hpp"

namespace py = pybind11;
using namespace morph3d;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// rows x cols copy; row 0 is origin_y
Array depth_to_numpy(const DepthMap& d) {
  Array a({d.height(), d.width()});
  std::copy(d.cells().begin(), d.cells().end(), a.mutable_data());
  return a;
}

DepthMap depth_from_numpy(const GridSpec& g, const Array& a) {
  if (a.ndim() != 2 || a.shape(0) != g.height || a.shape(1) != g.width) {
    throw Error(ErrorCode::GridMismatch, "array shape must be (grid.height, grid.width)");
  }
  return DepthMap(g, std::vector<double>(a.data(), a.data() + a.size()));
}

Array vertices_to_numpy(const TriMesh& m) {
  Array a({static_cast<py::ssize_t>(m.vertex_count()), py::ssize_t{3}});
  double* p = a.mutable_data();
  for (const auto& v : m.vertices()) {
    *p++ = v.x();
    *p++ = v.y();
    *p++ = v.z();
  }
  return a;
}

py::array_t<std::uint32_t> faces_to_numpy(const TriMesh& m) {
  py::array_t<std::uint32_t> a({static_cast<py::ssize_t>(m.face_count()), py::ssize_t{3}});
  std::uint32_t* p = a.mutable_data();
  for (const auto& f : m.faces())
    for (auto i : f) *p++ = i;
  return a;
}

TriMesh mesh_from_numpy(const Array& v, const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& f) {
  if (v.ndim() != 2 || v.shape(1) != 3) throw Error(ErrorCode::MalformedFile, "vertices must be (n, 3)");
  if (f.ndim() != 2 || f.shape(1) != 3) throw Error(ErrorCode::MalformedFile, "faces must be (m, 3)");
  std::vector<Vec3> verts(static_cast<std::size_t>(v.shape(0)));
  for (std::size_t i = 0; i < verts.size(); ++i) verts[i] = Vec3(v.at(i, 0), v.at(i, 1), v.at(i, 2));
  std::vector<Face> faces(static_cast<std::size_t>(f.shape(0)));
  for (std::size_t i = 0; i < faces.size(); ++i)
    for (int k = 0; k < 3; ++k) {
      const auto idx = f.at(i, k);
      if (idx < 0) throw Error(ErrorCode::MalformedFile, "negative face index");
      faces[i][k] = static_cast<std::uint32_t>(idx);
    }
  return TriMesh(std::move(verts), std::move(faces));
}

std::vector<MorphTrial> trials_from(const std::vector<std::pair<std::vector<double>, std::vector<double>>>& mated) {
  std::vector<MorphTrial> out;
  for (const auto& [a, b] : mated) out.push_back({"", {}, {a, b}});
  return out;
}

py::dict report_dict(const MetricsReport& r) {
  py::dict d;
  d["matcher"] = r.matcher;
  d["polarity"] = to_string(r.polarity);
  d["tau"] = r.tau;
  d["fmr"] = r.fmr;
  d["fnmr"] = r.fnmr;
  d["mmpmr"] = r.mmpmr;
  d["rmmr"] = r.rmmr;
  d["n_genuine"] = r.n_genuine;
  d["n_impostor"] = r.n_impostor;
  d["n_morphs"] = r.n_morphs;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "3D face morphing and morph-attack evaluation";

  // message is "Code: detail"
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  py::class_<GridSpec>(m, "GridSpec")
      .def(py::init<>())
      .def(py::init([](int w, int h, double ox, double oy, double sx, double sy) {
             GridSpec g{w, h, ox, oy, sx, sy};
             g.validate();
             return g;
           }),
           py::arg("width"), py::arg("height"), py::arg("origin_x"), py::arg("origin_y"), py::arg("spacing_x") = 1.5,
           py::arg("spacing_y") = 1.5)
      .def_readwrite("width", &GridSpec::width)
      .def_readwrite("height", &GridSpec::height)
      .def_readwrite("origin_x", &GridSpec::origin_x)
      .def_readwrite("origin_y", &GridSpec::origin_y)
      .def_readwrite("spacing_x", &GridSpec::spacing_x)
      .def_readwrite("spacing_y", &GridSpec::spacing_y)
      .def("__eq__", [](const GridSpec& a, const GridSpec& b) { return a == b; });

  py::class_<DepthMap>(m, "DepthMap")
      .def(py::init([](const GridSpec& g, const Array& a) { return depth_from_numpy(g, a); }), py::arg("grid"),
           py::arg("values"))
      .def_property_readonly("grid", &DepthMap::grid)
      .def_property_readonly("valid_count", &DepthMap::valid_count)
      .def("to_numpy", &depth_to_numpy)
      .def("save_csv", [](const DepthMap& d, const std::string& p) { write_depth_csv(d, p); })
      .def_static("load_csv", [](const std::string& p) { return read_depth_csv(p); });
  m.def("rms_difference", &rms_difference);

  py::class_<TriMesh>(m, "TriMesh")
      .def(py::init(&mesh_from_numpy), py::arg("vertices"), py::arg("faces"))
      .def_property_readonly("vertices", &vertices_to_numpy)
      .def_property_readonly("faces", &faces_to_numpy)
      .def_property_readonly("vertex_count", &TriMesh::vertex_count)
      .def_property_readonly("face_count", &TriMesh::face_count);
  m.def("read_mesh", py::overload_cast<const std::string&>(&read_mesh));
  m.def("write_mesh", [](const TriMesh& mesh, const std::string& path, bool ascii) {
    write_mesh(mesh, path, MeshFormat::Ply, ascii ? PlyEncoding::Ascii : PlyEncoding::BinaryLittleEndian);
  }, py::arg("mesh"), py::arg("path"), py::arg("ascii") = false);

  py::class_<NoiseProfile>(m, "NoiseProfile")
      .def(py::init<>())
      .def_static("named", &NoiseProfile::named)
      .def_readwrite("max_rotation_deg", &NoiseProfile::max_rotation_deg)
      .def_readwrite("max_translation_mm", &NoiseProfile::max_translation_mm)
      .def_readwrite("sigma_mm", &NoiseProfile::sigma_mm)
      .def_readwrite("expression_mm", &NoiseProfile::expression_mm)
      .def_readwrite("eye_holes", &NoiseProfile::eye_holes);
  py::class_<PopulationConfig>(m, "PopulationConfig")
      .def(py::init([](std::uint64_t seed, int subjects, int samples, const std::string& noise) {
             PopulationConfig c;
             c.seed = seed;
             c.n_subjects = subjects;
             c.samples_per_subject = samples;
             c.noise = NoiseProfile::named(noise);
             return c;
           }),
           py::arg("seed") = 7, py::arg("subjects") = 40, py::arg("samples") = 3, py::arg("noise") = "default")
      .def_readwrite("seed", &PopulationConfig::seed)
      .def_readwrite("n_subjects", &PopulationConfig::n_subjects)
      .def_readwrite("samples_per_subject", &PopulationConfig::samples_per_subject)
      .def_readwrite("noise", &PopulationConfig::noise);
  m.def("generate_sample", [](const PopulationConfig& c, int subject, int sample) {
    FaceSample f = generate_sample(c, subject, sample);
    return py::make_tuple(f.mesh, f.truth.nose_tip);
  }, py::arg("config"), py::arg("subject"), py::arg("sample"), "returns (mesh, ground-truth nose tip)");

  m.def("register_face", [](const TriMesh& mesh) {
    const IntrinsicRegistration r = register_face(mesh);
    py::dict d;
    d["rotation"] = Mat3(r.transform.rotation());
    d["translation"] = Vec3(r.transform.translation());
    d["nose_tip"] = r.nose_tip;
    d["symmetry_residual_mm"] = r.symmetry_residual_mm;
    return d;
  });
  m.def("register_and_rasterize", [](const TriMesh& mesh, const GridSpec& g) { return register_and_rasterize(mesh, {}, g); },
        py::arg("mesh"), py::arg("grid") = GridSpec{});

  py::class_<ShapeModel>(m, "ShapeModel")
      .def_property_readonly("k", &ShapeModel::k)
      .def_property_readonly("mean", &ShapeModel::mean)
      .def_property_readonly("sigmas", &ShapeModel::sigmas)
      .def_property_readonly("training_count", &ShapeModel::training_count)
      .def("explained_variance_ratio", &ShapeModel::explained_variance_ratio)
      .def("component", &ShapeModel::component)
      .def("save", py::overload_cast<const std::string&>(&ShapeModel::save, py::const_))
      .def_static("load", py::overload_cast<const std::string&>(&ShapeModel::load));
  m.def("build_model", &build_model, py::arg("faces"), py::arg("k"));
  m.def("fit_coefficients", [](const ShapeModel& s, const DepthMap& d) { return Eigen::VectorXd(fit_coefficients(s, d)); });
  m.def("reconstruct", [](const ShapeModel& s, const Eigen::VectorXd& c) { return reconstruct(s, c); });

  m.def("depth_average", [](const DepthMap& a, const DepthMap& b, double alpha, const std::string& policy) {
    MorphSpec s;
    s.alpha = alpha;
    s.hole_policy = hole_policy_from_string(policy);
    return depth_average(a, b, s);
  }, py::arg("a"), py::arg("b"), py::arg("alpha") = 0.5, py::arg("hole_policy") = "union");
  m.def("coefficient_average", [](const ShapeModel& model, const DepthMap& a, const DepthMap& b, double alpha) {
    MorphSpec s;
    s.method = MorphMethod::CoefficientAverage;
    s.alpha = alpha;
    return coefficient_average(model, a, b, s).depth;
  }, py::arg("model"), py::arg("a"), py::arg("b"), py::arg("alpha") = 0.5);
  m.def("morph_to_mesh", &morph_to_mesh);

  py::enum_<Polarity>(m, "Polarity").value("SIMILARITY", Polarity::Similarity).value("DISTANCE", Polarity::Distance);
  m.def("fmr", [](const std::vector<double>& s, double tau, Polarity p) { return fmr(s, tau, p); });
  m.def("fnmr", [](const std::vector<double>& s, double tau, Polarity p) { return fnmr(s, tau, p); });
  m.def("mmpmr", [](const std::vector<std::pair<std::vector<double>, std::vector<double>>>& mated, double tau, Polarity p) {
    return mmpmr(trials_from(mated), tau, p);
  }, py::arg("mated"), py::arg("tau"), py::arg("polarity"), "mated: list of (scores vs subject a, scores vs subject b)");
  m.def("rmmr", &rmmr);
  m.def("calibrate_threshold", [](const std::vector<double>& g, const std::vector<double>& i, double target, Polarity p) {
    return calibrate_threshold(g, i, target, p);
  });

  py::class_<LikelihoodMatcher>(m, "LikelihoodMatcher")
      .def_property_readonly("region_count", &LikelihoodMatcher::region_count)
      .def("score", py::overload_cast<const DepthMap&, const DepthMap&>(&LikelihoodMatcher::score, py::const_))
      .def("save", py::overload_cast<const std::string&>(&LikelihoodMatcher::save, py::const_))
      .def_static("load", py::overload_cast<const std::string&>(&LikelihoodMatcher::load));
  m.def("train_likelihood_matcher", [](const std::vector<std::pair<std::string, DepthMap>>& data) {
    std::vector<LabeledDepthMap> t;
    for (const auto& [s, d] : data) t.push_back({s, d});
    return train_likelihood_matcher(t);
  }, py::arg("training"), "training: list of (subject id, depth map)");
  m.def("distance_descriptor", [](const DepthMap& d) { return Eigen::VectorXd(distance_descriptor(d)); });
  m.def("cosine_distance", &cosine_distance);
  m.def("distance_score", [](const DepthMap& p, const DepthMap& g) { return score_distance(p, g).score; });

  m.def("preset_names", [] {
    std::vector<std::string> n;
    for (const auto& p : preset_list()) n.push_back(p.name);
    return n;
  });
  m.def("preset_config", [](const std::string& name) { return config_to_json(preset(name)); });
  m.def("run_experiment", [](const std::string& config_json, const std::string& out_dir) {
    ExperimentResult r;
    {
      py::gil_scoped_release release;
      r = run_experiment(config_from_json(config_json), out_dir);
    }
    py::list reports;
    for (const auto& rep : r.reports) reports.append(report_dict(rep));
    py::dict d;
    d["report_json"] = r.report_json;
    d["reports"] = reports;
    return d;
  }, py::arg("config_json"), py::arg("out_dir") = "");
}
