#include "confdyn/config.hpp"
#include "confdyn/diagnostics.hpp"
#include "confdyn/error.hpp"
#include "confdyn/flow.hpp"
#include "confdyn/geometry.hpp"
#include "confdyn/models.hpp"
#include "confdyn/verify.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace confdyn;

namespace {

ModelParams to_params(const std::map<std::string, std::vector<double>>& p) {
  ModelParams out;
  for (const auto& [k, v] : p) out.set(k, v);
  return out;
}

IntegratorConfig to_config(const std::string& method, double h) {
  if (method == "reference") return IntegratorConfig::reference();
  if (method == "splitting") return IntegratorConfig::splitting(h);
  if (method == "rk4") return IntegratorConfig::rk4(h);
  throw Error(ErrorCode::InvalidArgument, "method must be reference, splitting or rk4");
}

py::dict trajectory_dict(const Trajectory& tr) {
  Mat states(static_cast<Eigen::Index>(tr.size()), tr.states.empty() ? 0 : tr.states.front().size());
  for (std::size_t k = 0; k < tr.size(); ++k) states.row(static_cast<Eigen::Index>(k)) = tr.states[k].transpose();
  py::dict d;
  d["times"] = tr.times;
  d["states"] = states;
  d["status"] = to_string(tr.status);
  d["t_escape"] = tr.t_escape;
  if (tr.has_rotation()) d["r_accum"] = tr.r_accum;
  return d;
}

}  // namespace

PYBIND11_MODULE(_confdyn, mod) {
  static py::exception<Error> error_type(mod, "ConfdynError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error_type, e.what());
    }
  });

  mod.def("models", [] { return registered_models(); });
  mod.def("model_parameters", [](const std::string& name) { return model_parameter_keys(name); });

  mod.def(
      "vector_field",
      [](const std::string& name, const Vec& x, const std::map<std::string, std::vector<double>>& params) {
        return Vec(eval_vector_field(instantiate_model(name, to_params(params)), x));
      },
      py::arg("name"), py::arg("x"), py::arg("params") = std::map<std::string, std::vector<double>>{});

  mod.def(
      "simulate",
      [](const std::string& name, const Vec& x0, double t, std::size_t samples,
         const std::map<std::string, std::vector<double>>& params, const std::string& method, double h) {
        const auto m = instantiate_model(name, to_params(params));
        const auto cfg = to_config(method, h);
        py::gil_scoped_release release;
        auto tr = integrate_flow(m, x0, 0.0, t, samples, cfg);
        py::gil_scoped_acquire acquire;
        return trajectory_dict(tr);
      },
      py::arg("name"), py::arg("x0"), py::arg("t"), py::arg("samples") = 101,
      py::arg("params") = std::map<std::string, std::vector<double>>{}, py::arg("method") = "reference",
      py::arg("h") = 0.01);

  mod.def(
      "conformality_ratio",
      [](const std::string& name, const Vec& x, const std::map<std::string, std::vector<double>>& params) {
        const auto m = instantiate_model(name, to_params(params));
        if (!m.map) throw Error(ErrorCode::NotApplicable, name + " is not a map model");
        return conformality_ratio_estimate(m.map_jacobian(x), m.two_form(x), m.two_form(m.map(x))).ratio;
      },
      py::arg("name"), py::arg("x"), py::arg("params") = std::map<std::string, std::vector<double>>{});

  mod.def(
      "verify",
      [](const std::string& scope, std::uint64_t seed, unsigned jobs) {
        DiagnosticsReport r;
        {
          py::gil_scoped_release release;
          r = verify_suite(scope, VerifyContext{seed, jobs});
        }
        return r.to_json(false);
      },
      py::arg("scope") = "all", py::arg("seed") = 7, py::arg("jobs") = 1,
      "Runs a verify scope; returns the JSON report text.");

  mod.def(
      "run_config",
      [](const std::string& text, const std::string& out_dir) {
        RunOptions opt;
        opt.out_dir = out_dir;
        opt.timestamp = false;
        std::ostringstream log, err;
        const int code = run_config(RunConfig::parse(text), opt, log, err);
        return py::make_tuple(code, log.str(), err.str());
      },
      py::arg("text"), py::arg("out_dir"), "Returns (exit code, log, error text).");
}
