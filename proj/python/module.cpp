#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "windscale/config.hpp"
#include "windscale/error.hpp"
#include "windscale/field_io.hpp"
#include "windscale/inference.hpp"
#include "windscale/metrics.hpp"
#include "windscale/synth.hpp"
#include "windscale/training.hpp"

namespace py = pybind11;
using namespace windscale;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

torch::Tensor to_tensor(const Array& a) {
  std::vector<std::int64_t> shape(a.shape(), a.shape() + a.ndim());
  return torch::from_blob(const_cast<double*>(a.data()), shape, torch::kFloat64).clone();
}

Array to_array(const torch::Tensor& t) {
  const auto c = t.to(torch::kFloat64).contiguous();
  Array out(std::vector<py::ssize_t>(c.sizes().begin(), c.sizes().end()));
  std::memcpy(out.mutable_data(), c.data_ptr<double>(), sizeof(double) * c.numel());
  return out;
}

std::vector<Variable> parse_channels(const std::vector<std::string>& names) {
  std::vector<Variable> out;
  for (const auto& n : names) {
    const auto v = parse_variable(n);
    if (!v) throw ConfigError("unknown variable '" + n + "'");
    out.push_back(*v);
  }
  return out;
}

std::vector<std::string> channel_names(const FieldGrid& g) {
  std::vector<std::string> out;
  for (auto v : g.channels()) out.emplace_back(variable_name(v));
  return out;
}

/// Trains from scratch on a dataset directory; returns the written files.
std::vector<std::string> train(const std::filesystem::path& data_dir, const std::filesystem::path& out,
                               const std::string& config_json) {
  const auto cfg = parse_run_config(config_json);
  const auto data = read_dataset(data_dir);
  std::filesystem::create_directories(out);
  RunOptions opts;
  opts.run_dir = out;
  RunResult result;
  py::gil_scoped_release release;
  fit(data.train, data.val, cfg.train, &result, opts);
  return result.files;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Covariate-conditioned wind downscaling (libtorch core).";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FileError>(m, "FileError", PyExc_OSError);

  py::class_<FieldGrid>(m, "Field")
      .def(py::init([](const std::vector<std::string>& channels, const Array& data, double spacing_km,
                       std::string timestamp) {
             return FieldGrid(parse_channels(channels), to_tensor(data), spacing_km, std::move(timestamp));
           }),
           py::arg("channels"), py::arg("data"), py::arg("spacing_km") = 2.5, py::arg("timestamp") = "")
      .def_property_readonly("channels", &channel_names)
      .def_property_readonly("data", [](const FieldGrid& g) { return to_array(g.data()); })
      .def_property_readonly("spacing_km", &FieldGrid::spacing_km)
      .def_property_readonly("timestamp", &FieldGrid::timestamp)
      .def_property_readonly("shape", [](const FieldGrid& g) {
        return py::make_tuple(g.channel_count(), g.height(), g.width());
      });

  m.def("read_field", &read_field, py::arg("path"));
  m.def("write_field", &write_field, py::arg("path"), py::arg("field"));
  m.def(
      "read_pair",
      [](const std::filesystem::path& path, const FieldGrid& covariates) {
        auto p = read_pair(path, covariates);
        return py::make_tuple(std::move(p.low), std::move(p.high));
      },
      py::arg("path"), py::arg("covariates"));

  m.def("preset_names", &preset_names);
  m.def("preset", [](const std::string& name) { return emit_run_config(preset(name)); }, py::arg("name"));

  m.def(
      "synth_data",
      [](const std::filesystem::path& out, const std::string& config_json) {
        const auto cfg = parse_run_config(config_json);
        py::gil_scoped_release release;
        return write_dataset(out, make_dataset(cfg.synth));
      },
      py::arg("out"), py::arg("config_json") = "{}");
  m.def("train", &train, py::arg("data_dir"), py::arg("out"), py::arg("config_json") = "{}");

  py::class_<Downscaler>(m, "Downscaler")
      .def_static("from_checkpoint", &Downscaler::from_checkpoint, py::arg("path"))
      .def("__call__", [](const Downscaler& d, const FieldGrid& low, const FieldGrid& cov) { return d(low, cov); },
           py::arg("low"), py::arg("covariates"), py::call_guard<py::gil_scoped_release>())
      .def("tiled", &Downscaler::tiled, py::arg("low"), py::arg("covariates"), py::arg("tile"),
           py::arg("halo") = -1, py::call_guard<py::gil_scoped_release>());

  m.def(
      "baseline",
      [](const FieldGrid& low, const std::string& method) { return downscale_baseline(low, parse_baseline(method)); },
      py::arg("low"), py::arg("method") = "bilinear");

  m.def("rmse", [](const Array& a, const Array& b) { return rmse(to_tensor(a), to_tensor(b)); });
  m.def("rapsd", [](const Array& x) {
    const auto r = rapsd(to_tensor(x));
    return py::make_tuple(r.wavenumber, r.power);
  });
  m.def(
      "lsd",
      [](const Array& ref, const Array& pred, double floor) {
        return lsd(rapsd(to_tensor(ref)), rapsd(to_tensor(pred)), floor);
      },
      py::arg("ref"), py::arg("pred"), py::arg("floor") = 0.0);
}
