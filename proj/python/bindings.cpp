#include "plmb/errors.hpp"
#include "plmb/filter.hpp"
#include "plmb/fusion.hpp"
#include "plmb/labeled_ufs.hpp"
#include "plmb/metrics.hpp"
#include "plmb/monte_carlo.hpp"
#include "plmb/network.hpp"
#include "plmb/scenario.hpp"

#include <pybind11/eigen.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace plmb;

namespace {

py::dict run_dict(const RunResult& r) {
  py::dict out;
  out["run"] = r.run;
  out["ospa"] = r.ospa;
  out["ospa2"] = r.ospa2;
  out["card_true"] = r.card_true;
  out["card_est"] = r.card_est;
  py::list est;
  for (const auto& e : r.estimates) {
    est.append(py::make_tuple(e.step, e.node, e.label, e.x, e.y));
  }
  out["estimates"] = est;
  return out;
}

py::list summary_list(const std::vector<SummaryRow>& rows) {
  py::list out;
  for (const auto& s : rows) {
    out.append(py::make_tuple(s.step, s.ospa_mean, s.ospa2_mean, s.card_true_mean, s.card_est_mean));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_plmb, m) {
  m.doc() = "Possibility labeled multi-Bernoulli filtering and multi-sensor fusion";

  py::register_exception<Error>(m, "PlmbError", PyExc_ValueError);

  py::class_<Label>(m, "Label")
      .def(py::init<std::uint32_t, std::uint32_t>(), py::arg("birth_time") = 0, py::arg("index") = 0)
      .def_readwrite("birth_time", &Label::birth_time)
      .def_readwrite("index", &Label::index)
      .def(py::self == py::self)
      .def(py::self < py::self)
      .def("__hash__", [](const Label& l) { return py::hash(py::make_tuple(l.birth_time, l.index)); })
      .def("__repr__", [](const Label& l) { return "Label" + to_string(l); });

  py::class_<GaussianComponent>(m, "GaussianComponent")
      .def(py::init<double, Vector, Matrix>(), py::arg("weight"), py::arg("mean"), py::arg("cov"))
      .def_property_readonly("weight", &GaussianComponent::weight)
      .def_property_readonly("mean", &GaussianComponent::mean)
      .def_property_readonly("cov", &GaussianComponent::cov)
      .def("__call__", &GaussianComponent::eval, py::arg("x"));

  py::class_<MaxMixture>(m, "MaxMixture")
      .def(py::init<std::vector<GaussianComponent>>(), py::arg("components"))
      .def("__len__", &MaxMixture::size)
      .def("__getitem__",
           [](const MaxMixture& mm, std::size_t i) {
             if (i >= mm.size()) throw py::index_error();
             return mm[i];
           })
      .def_property_readonly("dominant", &MaxMixture::dominant)
      .def("__call__", [](const MaxMixture& mm, const Vector& x) { return mixture_eval(mm, x); }, py::arg("x"));

  m.def("gaussian_product", &gaussian_product, py::arg("a"), py::arg("b"));
  m.def("mixture_power", &mixture_power, py::arg("m"), py::arg("omega"));
  m.def("supremum", &supremum, py::arg("m"));

  py::class_<BernoulliTrack>(m, "BernoulliTrack")
      .def(py::init([](Label l, double tau, double gamma, MaxMixture f) {
             return BernoulliTrack{l, tau, gamma, std::move(f)};
           }),
           py::arg("label"), py::arg("tau"), py::arg("gamma"), py::arg("f"))
      .def_readwrite("label", &BernoulliTrack::label)
      .def_readwrite("tau", &BernoulliTrack::tau)
      .def_readwrite("gamma", &BernoulliTrack::gamma)
      .def_readwrite("f", &BernoulliTrack::f);

  py::class_<LmbDensity>(m, "LmbDensity")
      .def(py::init<>())
      .def(py::init<std::vector<BernoulliTrack>>(), py::arg("tracks"))
      .def("__len__", &LmbDensity::size)
      .def("__getitem__",
           [](const LmbDensity& d, std::size_t i) {
             if (i >= d.size()) throw py::index_error();
             return d[i];
           })
      .def("labels", &LmbDensity::labels);

  py::class_<TrackEstimate>(m, "TrackEstimate")
      .def_readonly("label", &TrackEstimate::label)
      .def_readonly("state", &TrackEstimate::state);
  m.def("map_estimate", &map_estimate, py::arg("density"));
  m.def("presence", py::overload_cast<const LmbDensity&, const Vector&>(&presence_function), py::arg("density"),
        py::arg("x"));

  py::class_<MotionModel>(m, "MotionModel")
      .def_static("constant_velocity", &MotionModel::constant_velocity, py::arg("dt"), py::arg("sigma_q"),
                  py::arg("survival") = 1.0, py::arg("death") = 0.05)
      .def_readwrite("F", &MotionModel::F)
      .def_readwrite("Q", &MotionModel::Q)
      .def_readwrite("survival", &MotionModel::survival)
      .def_readwrite("death", &MotionModel::death);

  py::class_<SensorModel>(m, "SensorModel")
      .def_static("position_sensor", &SensorModel::position_sensor, py::arg("id"), py::arg("position"),
                  py::arg("sigma_r"), py::arg("sigma_s"), py::arg("clutter_rate"), py::arg("clutter_volume") = 0.0)
      .def_readonly("position", &SensorModel::position)
      .def("detection_failure", &SensorModel::detection_failure, py::arg("x"));

  py::class_<FilterParams>(m, "FilterParams")
      .def(py::init<>())
      .def_readwrite("max_hypotheses", &FilterParams::max_hypotheses)
      .def_readwrite("gate_threshold", &FilterParams::gate_threshold);

  m.def("predict", &predict, py::arg("density"), py::arg("motion"), py::arg("birth") = LmbDensity(),
        py::arg("omega") = 1.0);
  m.def(
      "update",
      [](const LmbDensity& d, const MeasurementSet& z, const SensorModel& s, const FilterParams& p) {
        const UpdateResult r = update_direct(d, z, s, p);
        return py::make_tuple(r.posterior, r.usage);
      },
      py::arg("density"), py::arg("z"), py::arg("sensor"), py::arg("params") = FilterParams());
  m.def("prune_tracks", &prune_tracks, py::arg("density"), py::arg("existence_threshold"), py::arg("max_tracks"));

  m.def(
      "fuse_tracks",
      [](const BernoulliTrack& a, const BernoulliTrack& b, double wa, double wb) {
        const FusedTrack f = fuse_tracks_detailed(a, b, wa, wb);
        return py::make_tuple(f.track, f.eta_f);
      },
      py::arg("a"), py::arg("b"), py::arg("omega_a"), py::arg("omega_b"));

  py::class_<SensorGraph>(m, "SensorGraph")
      .def(py::init<std::size_t, const std::vector<SensorGraph::Edge>&>(), py::arg("nodes"),
           py::arg("edges") = std::vector<SensorGraph::Edge>{})
      .def_static("ring", &SensorGraph::ring)
      .def_static("line", &SensorGraph::line)
      .def_static("complete", &SensorGraph::complete)
      .def_static("star", &SensorGraph::star)
      .def_static("parse",
                  [](const std::string& text) {
                    std::istringstream in(text);
                    return SensorGraph::parse(in);
                  })
      .def("to_text",
           [](const SensorGraph& g) {
             std::ostringstream out;
             g.write(out);
             return out.str();
           })
      .def("__len__", &SensorGraph::size)
      .def("neighbors", &SensorGraph::neighbors)
      .def("is_connected", &SensorGraph::is_connected);
  m.def("metropolis_weights", &metropolis_weights, py::arg("graph"));

  m.def("ospa", &ospa, py::arg("x"), py::arg("y"), py::arg("c") = 100.0, py::arg("p") = 2.0);
  m.def("ospa2_windowed", &ospa2_windowed, py::arg("estimated"), py::arg("truth"), py::arg("window"),
        py::arg("c") = 100.0, py::arg("p") = 2.0);

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def(py::init([](const std::string& c) { return default_config(parse_case(c)); }), py::arg("case") = "A")
      .def_readwrite("steps", &ScenarioConfig::steps)
      .def_readwrite("mc_runs", &ScenarioConfig::mc_runs)
      .def_readwrite("seed", &ScenarioConfig::seed)
      .def_readwrite("threads", &ScenarioConfig::threads)
      .def_readwrite("sigma_s", &ScenarioConfig::sigma_s)
      .def_readwrite("lambda_fa", &ScenarioConfig::lambda_fa)
      .def_readwrite("sensor_count", &ScenarioConfig::sensor_count)
      .def_readwrite("topology", &ScenarioConfig::topology)
      .def_property_readonly("case", [](const ScenarioConfig& c) { return to_string(c.case_id); })
      .def(
          "apply",
          [](ScenarioConfig& c, const std::string& text) {
            std::istringstream in(text);
            apply_config(in, c);
          },
          py::arg("text"), "Applies key = value lines.")
      .def("to_text", [](const ScenarioConfig& c) {
        std::ostringstream out;
        write_config(out, c);
        return out.str();
      });

  m.def(
      "run_once",
      [](const ScenarioConfig& cfg, const std::string& method, int run) {
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_once(cfg, parse_method(method), run);
        }
        return run_dict(r);
      },
      py::arg("config"), py::arg("method"), py::arg("run") = 0);
  m.def(
      "monte_carlo",
      [](const ScenarioConfig& cfg, const std::string& method, std::optional<std::filesystem::path> out) {
        MonteCarloResult r;
        {
          py::gil_scoped_release release;
          r = monte_carlo(cfg, parse_method(method), out);
        }
        return summary_list(r.summary);
      },
      py::arg("config"), py::arg("method"), py::arg("out") = py::none(),
      "Per-step rows (step, ospa, ospa2, card_true, card_est) averaged over runs.");
  m.def(
      "recompute_metrics",
      [](const std::filesystem::path& dir) {
        py::dict out;
        for (const auto& r : recompute_metrics(dir)) {
          out[py::str(to_string(r.case_id) + "_" + to_string(r.method))] = summary_list(r.summary);
        }
        return out;
      },
      py::arg("dir"));
}
