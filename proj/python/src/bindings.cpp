#include "foldpath/io.hpp"
#include "foldpath/matching.hpp"
#include "foldpath/metrics.hpp"
#include "foldpath/neural_field.hpp"
#include "foldpath/path_model.hpp"
#include "foldpath/synthetic.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace foldpath;

namespace {

// Paths cross the boundary as (K, 6) arrays: position then orientation.
// Arrays with 3 columns are accepted where only positions matter.
Path path_from_array(const Matrix& a) {
  if (a.cols() != 6 && a.cols() != 3) throw std::domain_error("expected an array with 3 or 6 columns");
  Path p;
  p.poses.resize(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    auto& q = p.poses[static_cast<std::size_t>(r)];
    q.position = a.row(r).head<3>().transpose();
    if (a.cols() == 6) q.orientation = a.row(r).tail<3>().transpose();
  }
  return p;
}

Matrix path_to_array(const Path& p) {
  Matrix a(static_cast<Eigen::Index>(p.size()), 6);
  for (std::size_t k = 0; k < p.size(); ++k) {
    a.row(static_cast<Eigen::Index>(k)) << p.poses[k].position.transpose(), p.poses[k].orientation.transpose();
  }
  return a;
}

std::vector<Vec3> points_from_array(const Matrix& a) { return positions(path_from_array(a).poses); }

py::dict fscore_dict(const FScoreResult& r) {
  py::dict d;
  d["precision"] = r.precision;
  d["recall"] = r.recall;
  d["fscore"] = r.fscore;
  d["reversed"] = r.reversed;
  return d;
}

// {object_id: (gt_list, [(array, confidence), ...])}
EvalSet eval_set_from_python(const py::dict& data) {
  EvalSet set;
  for (const auto& [key, value] : data) {
    const auto pair = value.cast<py::tuple>();
    ObjectPaths obj;
    for (const auto& g : pair[0].cast<std::vector<Matrix>>()) obj.gt.push_back(path_from_array(g));
    for (const auto& [arr, conf] : pair[1].cast<std::vector<std::pair<Matrix, double>>>()) {
      obj.predictions.push_back({path_from_array(arr), conf});
    }
    set[key.cast<std::string>()] = std::move(obj);
  }
  return set;
}

py::dict report_to_python(const EvalReport& r) {
  return py::module_::import("json").attr("loads")(report_to_json(r).dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "FoldPath core: path model, metrics, matching losses and the neural path head";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  // path model
  m.def(
      "sample_params",
      [](const std::string& strategy, std::size_t count, std::uint64_t seed, std::optional<double> noise_sigma) {
        return sample_params({sampling_strategy_from_string(strategy), count, noise_sigma, seed});
      },
      py::arg("strategy"), py::arg("count"), py::arg("seed") = 0, py::arg("noise_sigma") = py::none());
  m.def(
      "interp_at",
      [](const Matrix& path, double s, bool arc_length) {
        const Pose6D q = interp_at(path_from_array(path), s,
                                   arc_length ? InterpolationMode::arc_length : InterpolationMode::index);
        Eigen::Matrix<double, 6, 1> out;
        out << q.position, q.orientation;
        return out;
      },
      py::arg("path"), py::arg("s"), py::arg("arc_length") = false);
  m.def(
      "resample",
      [](const Matrix& path, const std::vector<double>& params, bool arc_length) {
        return path_to_array(resample(path_from_array(path), params,
                                      arc_length ? InterpolationMode::arc_length : InterpolationMode::index));
      },
      py::arg("path"), py::arg("params"), py::arg("arc_length") = false);
  m.def("reverse", [](const Matrix& path) { return path_to_array(reverse(path_from_array(path))); });

  // metrics
  m.def("dtw_align", [](const Matrix& a, const Matrix& b) {
    const auto r = dtw_align(points_from_array(a), points_from_array(b));
    return py::make_tuple(r.cost, r.warp);
  });
  m.def(
      "pose_fscore",
      [](const Matrix& gt, const Matrix& pred, double delta, double theta) {
        return fscore_dict(pose_fscore(path_from_array(gt).poses, path_from_array(pred).poses, {delta, theta}));
      },
      py::arg("gt"), py::arg("pred"), py::arg("delta") = 0.025, py::arg("theta") = 10.0);
  m.def(
      "fscore_bidirectional",
      [](const Matrix& gt, const Matrix& pred, double delta, double theta) {
        return fscore_dict(fscore_bidirectional(path_from_array(gt), path_from_array(pred), {delta, theta}));
      },
      py::arg("gt"), py::arg("pred"), py::arg("delta") = 0.025, py::arg("theta") = 10.0);
  m.def("pcd", [](const Matrix& pred, const Matrix& gt) {
    return pcd(path_from_array(pred).poses, path_from_array(gt).poses);
  });
  m.def(
      "average_precision",
      [](const py::dict& data, double tau, double delta, double theta) {
        return average_precision(eval_set_from_python(data), tau, {delta, theta});
      },
      py::arg("data"), py::arg("tau"), py::arg("delta") = 0.025, py::arg("theta") = 10.0);
  m.def(
      "ap_suite",
      [](const py::dict& data, double delta, double theta) {
        const auto r = ap_suite(eval_set_from_python(data), {delta, theta});
        return py::make_tuple(r.ap50, r.ap, r.ap_easy);
      },
      py::arg("data"), py::arg("delta") = 0.025, py::arg("theta") = 10.0);
  m.def(
      "evaluate",
      [](const py::dict& data, double delta, double theta, std::size_t samples) {
        return report_to_python(evaluate(eval_set_from_python(data), {delta, theta}, samples));
      },
      py::arg("data"), py::arg("delta") = 0.025, py::arg("theta") = 10.0, py::arg("samples") = 384);
  m.def(
      "evaluate_files",
      [](const std::filesystem::path& gt, const std::filesystem::path& pred, double delta, double theta,
         std::size_t samples) {
        return report_to_python(
            evaluate(make_eval_set(load_dataset(gt), load_dataset(pred)), {delta, theta}, samples));
      },
      py::arg("gt"), py::arg("pred"), py::arg("delta") = 0.025, py::arg("theta") = 10.0, py::arg("samples") = 384);

  // matching
  m.def("hungarian", [](const Matrix& cost) {
    const auto r = hungarian(cost);
    return py::make_tuple(r.permutation, r.total_cost);
  });
  m.def(
      "match_cost",
      [](const Matrix& target, const Matrix& pred, bool is_real) {
        return match_cost(path_from_array(target).poses, path_from_array(pred).poses, is_real);
      },
      py::arg("target"), py::arg("pred"), py::arg("is_real") = true);
  m.def(
      "focal_conf_loss",
      [](const std::vector<double>& targets, const std::vector<double>& predicted, double gamma) {
        return focal_conf_loss(targets, predicted, gamma);
      },
      py::arg("targets"), py::arg("predicted"), py::arg("gamma") = 2.0);
  m.def(
      "total_loss",
      [](const std::vector<Matrix>& gt, const std::vector<std::pair<Matrix, double>>& preds, std::size_t slots,
         const std::vector<double>& params, double gamma) {
        std::vector<Path> g;
        for (const auto& a : gt) g.push_back(path_from_array(a));
        std::vector<PredictedPath> p;
        for (const auto& [a, c] : preds) p.push_back({path_from_array(a), c});
        const auto r = total_loss(g, p, slots, params, gamma);
        return py::make_tuple(r.points_loss, r.conf_loss, r.total);
      },
      py::arg("gt"), py::arg("preds"), py::arg("slots"), py::arg("params"), py::arg("gamma") = 2.0);

  // neural field
  py::class_<HeadConfig>(m, "HeadConfig")
      .def(py::init<>())
      .def_readwrite("layers", &HeadConfig::layers)
      .def_readwrite("hidden", &HeadConfig::hidden)
      .def_readwrite("codeword", &HeadConfig::codeword)
      .def_readwrite("conf_hidden", &HeadConfig::conf_hidden)
      .def_property(
          "activation", [](const HeadConfig& c) { return std::string(to_string(c.activation)); },
          [](HeadConfig& c, const std::string& s) { c.activation = activation_from_string(s); })
      .def_property(
          "conditioning", [](const HeadConfig& c) { return std::string(to_string(c.conditioning)); },
          [](HeadConfig& c, const std::string& s) { c.conditioning = conditioning_from_string(s); })
      .def_readwrite("omega0", &HeadConfig::omega0)
      .def_readwrite("finer_bias_bound", &HeadConfig::finer_bias_bound)
      .def_readwrite("use_bias", &HeadConfig::use_bias)
      .def_readwrite("seed", &HeadConfig::seed);

  py::class_<HeadParams>(m, "HeadParams")
      .def_readonly("config", &HeadParams::config)
      .def("parameter_count", [](const HeadParams& p) { return parameter_count(p); })
      .def("to_json", [](const HeadParams& p) { return head_to_json(p).dump(); })
      .def_static("from_json", [](const std::string& s) { return head_from_json(Json::parse(s)); });

  m.def("init_head", &init_head);
  m.def("parameter_count", py::overload_cast<const HeadConfig&>(&parameter_count));
  m.def("head_forward", [](const HeadParams& p, const Vector& codeword, const std::vector<double>& xs) {
    return head_forward_batch(p, codeword, xs);
  });
  m.def("confidence_forward", &confidence_forward);

  // data
  m.def(
      "gen_raster",
      [](std::size_t strokes, std::size_t waypoints, std::uint64_t seed, std::size_t objects, double bend,
         double jitter, const std::filesystem::path& out) {
        SyntheticConfig c;
        c.strokes = strokes;
        c.waypoints_per_stroke = waypoints;
        c.seed = seed;
        c.bend = bend;
        c.jitter_sigma = jitter;
        save_dataset(out, gen_raster_dataset(c, objects));
      },
      py::arg("strokes"), py::arg("waypoints"), py::arg("seed"), py::arg("objects") = 1, py::arg("bend") = 0.0,
      py::arg("jitter") = 0.0, py::arg("out"));
  m.def("load_dataset", [](const std::filesystem::path& file) {
    py::dict out;
    for (const auto& o : load_dataset(file)) {
      py::list gt, preds;
      for (const auto& p : o.gt_paths) gt.append(path_to_array(p));
      for (const auto& p : o.predictions) preds.append(py::make_tuple(path_to_array(p.path), p.confidence));
      out[py::str(o.id)] = py::make_tuple(gt, preds);
    }
    return out;
  });
  m.def("save_dataset", [](const std::filesystem::path& file, const py::dict& data) {
    Dataset d;
    for (auto& [id, obj] : eval_set_from_python(data)) d.push_back({id, {}, obj.gt, obj.predictions});
    save_dataset(file, d);
  });
}
