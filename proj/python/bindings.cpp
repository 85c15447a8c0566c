#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"
#include "svlab/dynsys/spec_json.hpp"
#include "svlab/error.hpp"
#include "svlab/idest/mle.hpp"
#include "svlab/train/metrics.hpp"
#include "svlab/train/pipeline.hpp"

namespace py = pybind11;
using namespace svlab;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const std::vector<double>& v, std::vector<py::ssize_t> shape) {
  Array out(shape);
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

SystemSpec spec_of(const std::string& text) {
  if (!text.empty() && text.front() == '{') return spec_from_json(nlohmann::json::parse(text));
  return SystemSpec::defaults(parse_system_kind(text));
}

py::dict simulate_py(const std::string& system, int n_frames, double dt_frame, int substeps,
                     std::optional<std::vector<double>> initial, std::uint64_t seed) {
  const SystemSpec spec = spec_of(system);
  StateVector x0;
  if (initial) {
    x0 = StateVector(initial->begin(), initial->end());
  } else {
    Rng rng(seed);
    x0 = sample_initial_conditions(spec, rng);
  }
  Trajectory tr;
  {
    py::gil_scoped_release release;
    tr = simulate(spec, x0, n_frames, dt_frame > 0 ? dt_frame : default_dt_frame(spec.kind), substeps);
  }
  std::vector<double> states, aux;
  for (const auto& s : tr.states) states.insert(states.end(), s.begin(), s.end());
  for (const auto& a : tr.aux) aux.insert(aux.end(), a.begin(), a.end());
  const auto n = static_cast<py::ssize_t>(tr.size());
  py::dict out;
  out["dt_frame"] = tr.dt_frame;
  out["states"] = to_array(states, {n, static_cast<py::ssize_t>(spec.state_size())});
  out["aux"] = to_array(aux, {n, static_cast<py::ssize_t>(spec.aux_names().size())});
  out["aux_names"] = spec.aux_names();
  return out;
}

std::string mle_id_py(const Array& points, std::size_t k1, std::size_t k2) {
  if (points.ndim() != 2) throw DimensionError("points must be a 2-d array");
  const auto n = static_cast<std::size_t>(points.shape(0)), d = static_cast<std::size_t>(points.shape(1));
  PointCloud cloud(n, d, std::vector<double>(points.data(), points.data() + n * d));
  py::gil_scoped_release release;
  return to_json(mle_id(cloud, k1, k2)).dump();
}

std::string train_py(const std::string& config_json, const std::string& run_dir) {
  const TrainConfig config = config_from_json(nlohmann::json::parse(config_json));
  config.validate();
  py::gil_scoped_release release;
  const Dataset ds = prepare_dataset(config);
  if (ds.mode != DatasetMode::vectors) throw ContractError("train() supports vectors mode only; use the CLI for frames");
  return run_inner_pipeline(config, ds, nullptr, run_dir).report.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the svlab C++ core";

  // translators run newest first, so the base class goes first
  const auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  m.def("simulate", &simulate_py, py::arg("system"), py::arg("n_frames"), py::arg("dt_frame") = 0.0,
        py::arg("substeps") = 10, py::arg("initial") = std::nullopt, py::arg("seed") = 0);
  m.def(
      "hamiltonian",
      [](const std::string& system, const std::vector<double>& state) {
        return hamiltonian(spec_of(system), StateVector(state.begin(), state.end()));
      },
      py::arg("system"), py::arg("state"));
  m.def(
      "system_defaults", [](const std::string& kind) { return spec_to_json(spec_of(kind)).dump(); },
      py::arg("kind"));
  m.def("mle_id_json", &mle_id_py, py::arg("points"), py::arg("k1") = 10, py::arg("k2") = 20);
  m.def("dof_round", &dof_round, py::arg("id"));
  m.def(
      "count_active_dims",
      [](const std::vector<double>& variances, double threshold) {
        const auto a = count_active_dims(variances, threshold);
        return py::make_tuple(a.count, a.mask);
      },
      py::arg("variances"), py::arg("threshold") = 0.01);
  m.def(
      "default_config_json", [] { return config_to_json(TrainConfig{}).dump(); });
  m.def(
      "desk_config_json",
      [](const std::string& system, const std::string& variant, std::uint64_t seed) {
        return config_to_json(desk_config(parse_system_kind(system), parse_variant(variant), seed)).dump();
      },
      py::arg("system"), py::arg("variant"), py::arg("seed") = 0);
  m.def(
      "validate_config_json",
      [](const std::string& text) { return config_to_json(config_from_json(nlohmann::json::parse(text))).dump(); },
      py::arg("config"));
  m.def("train_json", &train_py, py::arg("config"), py::arg("run_dir") = "");
}
