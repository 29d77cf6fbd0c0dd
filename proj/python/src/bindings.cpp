#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cemflow/config.hpp"
#include "cemflow/error.hpp"
#include "cemflow/experiment.hpp"
#include "cemflow/fields.hpp"

namespace py = pybind11;
using namespace cemflow;

namespace {

py::dict row_dict(const ResultRow& r) {
  py::dict d;
  d["command"] = r.command;
  d["H"] = r.H;
  d["Nov"] = r.Nov;
  d["lm"] = r.lm;
  d["contrast"] = r.contrast;
  d["cflow"] = r.cflow;
  d["scheme"] = r.scheme;
  d["tau"] = r.tau;
  d["Lambda"] = r.Lambda;
  d["LambdaPrime"] = r.LambdaPrime;
  d["E_a"] = r.E_a;
  d["E_L"] = r.E_L;
  d["D_a"] = r.D_a;
  d["D_L"] = r.D_L;
  d["N_a"] = r.N_a;
  d["N_L"] = r.N_L;
  d["wall_s"] = r.wall_s;
  return d;
}

}  // namespace

PYBIND11_MODULE(_cemflow, m) {
  m.doc() = "Relaxed CEM-GMsFEM solver for convection-diffusion problems";
  m.attr("__version__") = CEMFLOW_VERSION;
  m.attr("RESULTS_HEADER") = std::string(kResultsHeader);

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  py::class_<ExperimentConfig>(m, "Config")
      .def_readwrite("output", &ExperimentConfig::output)
      .def_readwrite("threads", &ExperimentConfig::threads)
      .def_readonly("coarse", &ExperimentConfig::coarse)
      .def_readonly("layers", &ExperimentConfig::layers)
      .def_property_readonly("nx", [](const ExperimentConfig& c) { return c.problem.nx; })
      .def_property_readonly("ny", [](const ExperimentConfig& c) { return c.problem.ny; })
      .def_property_readonly("lm", [](const ExperimentConfig& c) { return c.problem.lm; })
      .def_readonly("resolved", &ExperimentConfig::resolved)
      .def("cells", &ExperimentConfig::cells)
      .def("dump", [](const ExperimentConfig& c) { return dump_config(c); });

  m.def("load_config", &parse_config, py::arg("path"), "Parses and validates an INI experiment file.");
  m.def("parse_config", &parse_config_text, py::arg("text"), "Parses and validates INI text.");

  m.def(
      "run",
      [](const std::string& command, ExperimentConfig config, std::optional<std::string> output) {
        if (output) config.output = *output;
        RunReport report;
        {
          py::gil_scoped_release release;
          report = run_experiment(command_from_string(command), config);
        }
        py::dict out;
        py::list rows;
        for (const auto& r : report.rows) rows.append(row_dict(r));
        out["rows"] = rows;
        out["timings"] = report.timings;
        out["files"] = report.files;
        out["output"] = config.output;
        return out;
      },
      py::arg("command"), py::arg("config"), py::arg("output") = py::none(),
      "Runs steady, transient, nonlinear, spectrum, sweep or reference and writes its artifacts.");

  m.def("read_snapshot", &read_snapshot, py::arg("path"), "Nodal field as a (ny+1, nx+1) array, bottom row first.");
  m.def("builtin_functions", &builtin_function_names);
  m.def("fnv1a", [](const std::string& s) { return fnv1a(s); });
}
