#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gazefuse/error.hpp"
#include "gazefuse/metrics.hpp"
#include "gazefuse/offset.hpp"
#include "gazefuse/pipeline.hpp"
#include "gazefuse/preprocess.hpp"

namespace py = pybind11;
using namespace gazefuse;

namespace {

std::vector<double> to_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

OffsetFeatureVector features_from(const std::vector<double>& v) {
  if (v.size() != 6) fail(ErrorCode::DimensionMismatch, "offset feature vectors have 6 entries");
  return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

}  // namespace

PYBIND11_MODULE(_gazefuse, m) {
  m.doc() = "Gaze-offset and embedding score fusion for eye-movement biometrics";
  m.attr("__version__") = std::string(tool_version());

  static py::handle error_type = py::exception<Error>(m, "GazefuseError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def("sg_differentiate",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x, double rate_hz) {
          return to_array(sg_differentiate(to_vector(x), rate_hz));
        },
        py::arg("positions"), py::arg("rate_hz"), "Savitzky-Golay first derivative (window 7, order 2), deg/s");

  m.def("angular_offset", &angular_offset, py::arg("gaze_x"), py::arg("gaze_y"), py::arg("target_x"),
        py::arg("target_y"), "Angle between gaze and target directions, degrees");

  m.def("idt_fixations",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& t,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& y, double dispersion,
           double min_duration_ms) {
          const auto tv = to_vector(t), xv = to_vector(x), yv = to_vector(y);
          if (tv.size() != xv.size() || tv.size() != yv.size()) throw py::value_error("t, x and y differ in length");
          std::vector<GazeSample> samples(tv.size());
          for (std::size_t i = 0; i < tv.size(); ++i) samples[i] = {tv[i], xv[i], yv[i], kMissing, kMissing};
          std::vector<std::pair<std::size_t, std::size_t>> out;
          for (const auto& f : idt_fixations(samples, {dispersion, min_duration_ms}))
            out.emplace_back(f.start_index, f.end_index);
          return out;
        },
        py::arg("t_ms"), py::arg("x"), py::arg("y"), py::arg("dispersion_threshold") = 1.0,
        py::arg("min_duration_ms") = 100.0, "I-DT fixations as inclusive (start, end) sample indices");

  m.def("offset_similarity",
        [](const std::vector<double>& a, const std::vector<double>& b) {
          return offset_similarity(features_from(a), features_from(b));
        },
        py::arg("a"), py::arg("b"));

  m.def("eer", [](const std::vector<double>& g, const std::vector<double>& i) { return eer(g, i); },
        py::arg("genuine"), py::arg("impostor"), "Equal error rate, percent");
  m.def("frr_at_far",
        [](const std::vector<double>& g, const std::vector<double>& i, double far) {
          const auto r = frr_at_far(g, i, far);
          return py::dict(py::arg("frr_percent") = r.frr_percent, py::arg("threshold") = r.threshold,
                          py::arg("achieved_far") = r.achieved_far, py::arg("reliable") = r.reliable);
        },
        py::arg("genuine"), py::arg("impostor"), py::arg("far_target") = 1e-4);

  m.def("weighted_fuse", &weighted_fuse, py::arg("s_ekyt"), py::arg("s_spatial"), py::arg("alpha"));
  m.def("two_score_features", &two_score_features, py::arg("s1"), py::arg("s2"));
  m.def("three_score_features", &three_score_features, py::arg("s1"), py::arg("s2"), py::arg("s3"));

  m.def("default_config", [] { return config_to_json(RunConfig{}); }, "Default run configuration as JSON");
  m.def("run_pipeline",
        [](const std::string& config_json, bool force) {
          auto config = config_from_json(config_json);
          config.force = force;
          RunSummary s;
          {
            py::gil_scoped_release release;
            s = run_pipeline(config);
          }
          return py::dict(py::arg("report") = s.report, py::arg("table") = s.table,
                          py::arg("stages_computed") = s.stages_computed, py::arg("stages_cached") = s.stages_cached);
        },
        py::arg("config_json"), py::arg("force") = false);
  m.def("render_table", [](const std::string& report_json) { return render_table(report_json); },
        py::arg("report_json"));

  m.def("synth",
        [](const std::filesystem::path& out_dir, int n_subjects, std::uint64_t seed, double duration_s,
           double rate_hz, double separation, double embedding_noise) {
          SynthConfig c;
          c.n_subjects = n_subjects;
          c.seed = seed;
          c.duration_s = duration_s;
          c.rate_hz = rate_hz;
          c.embedding_class_separation = separation;
          c.embedding_noise = embedding_noise;
          return synth_stage(c, out_dir / "").base_dir / "manifest.json";
        },
        py::arg("out_dir"), py::arg("n_subjects") = 40, py::arg("seed") = 7, py::arg("duration_s") = 40.0,
        py::arg("rate_hz") = 250.0, py::arg("separation") = 0.5, py::arg("embedding_noise") = 1.0,
        "Write a synthetic corpus; returns the manifest path");
}
