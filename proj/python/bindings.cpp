#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "efq/design.hpp"
#include "efq/errors.hpp"
#include "efq/experiment.hpp"
#include "efq/fit.hpp"
#include "efq/parallel.hpp"
#include "efq/simulate.hpp"
#include "efq/spectral.hpp"

namespace py = pybind11;
using namespace efq;

namespace {

ExperimentConfig config_from_string(const std::string& text) {
  return text.empty() ? default_config() : config_from_json(nlohmann::json::parse(text));
}

CommandContext context(const std::string& config_json, const std::string& out_dir) {
  CommandContext ctx;
  ctx.config = config_from_string(config_json);
  ctx.out_dir = out_dir;
  ctx.quiet = true;
  ctx.workers = default_worker_count();
  return ctx;
}

}  // namespace

PYBIND11_MODULE(_efq, m) {
  m.doc() = "Error-feedback quantizer design and simulation";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<InfeasibleError>(m, "InfeasibleError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<DegenerateFilterError>(m, "DegenerateFilterError", base.ptr());
  py::register_exception<InvariantError>(m, "InvariantError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());

  py::class_<FrequencyGrid>(m, "FrequencyGrid")
      .def(py::init<std::size_t>(), py::arg("n_points") = FrequencyGrid::kDefaultPoints)
      .def("__len__", &FrequencyGrid::size)
      .def_property_readonly("spacing", &FrequencyGrid::spacing)
      .def("omegas", &FrequencyGrid::omegas);

  py::class_<BandEdge>(m, "BandEdge")
      .def_readonly("omega", &BandEdge::omega)
      .def_readonly("left", &BandEdge::left)
      .def_readonly("right", &BandEdge::right);

  py::class_<AmplitudeResponse>(m, "AmplitudeResponse")
      .def(py::init<FrequencyGrid, std::vector<double>>(), py::arg("grid"), py::arg("values"))
      .def_property_readonly("grid", &AmplitudeResponse::grid)
      .def_property_readonly("values", &AmplitudeResponse::values)
      .def_property_readonly("edge", &AmplitudeResponse::edge)
      .def("__len__", &AmplitudeResponse::size);

  py::class_<ContinuousTF>(m, "ContinuousTF")
      .def(py::init<std::vector<double>, std::vector<double>, double>(), py::arg("num"),
           py::arg("den"), py::arg("sample_period"))
      .def_property_readonly("num", &ContinuousTF::num)
      .def_property_readonly("den", &ContinuousTF::den)
      .def_property_readonly("sample_period", &ContinuousTF::sample_period);

  py::class_<RationalDiscreteTF>(m, "RationalDiscreteTF")
      .def(py::init<std::vector<double>, std::vector<double>>(), py::arg("num"),
           py::arg("den") = std::vector<double>{1.0})
      .def_property_readonly("num", &RationalDiscreteTF::num)
      .def_property_readonly("den", &RationalDiscreteTF::den)
      .def("frequency_response", &RationalDiscreteTF::frequency_response)
      .def("max_pole_magnitude", &RationalDiscreteTF::max_pole_magnitude)
      .def("is_stable", &RationalDiscreteTF::is_stable);

  m.def("l2_norm_sq", &l2_norm_sq);
  m.def("log_geometric_mean", &log_geometric_mean);
  m.def("amplitude_of_tf",
        py::overload_cast<const RationalDiscreteTF&, const FrequencyGrid&>(&amplitude_of_tf));
  m.def("ct_frequency_map", &ct_frequency_map, py::arg("plant"), py::arg("lam"), py::arg("grid"));
  m.def("oversample_response", &oversample_response);

  py::class_<DesignProblem>(m, "DesignProblem")
      .def(py::init<AmplitudeResponse, double>(), py::arg("p"), py::arg("gamma"))
      .def_property_readonly("gamma", &DesignProblem::gamma)
      .def_property_readonly("nu", &DesignProblem::nu);

  py::class_<OptimalDesign>(m, "OptimalDesign")
      .def_readonly("alpha_opt", &OptimalDesign::alpha_opt)
      .def_readonly("theta_opt", &OptimalDesign::theta_opt)
      .def_readonly("r_opt", &OptimalDesign::r_opt)
      .def_readonly("distortion", &OptimalDesign::distortion)
      .def_readonly("norm_r_sq", &OptimalDesign::norm_r_sq)
      .def_readonly("n_of_alpha", &OptimalDesign::n_of_alpha)
      .def_readonly("constant_plant", &OptimalDesign::constant_plant);

  m.def("theta", &theta);
  m.def("solve_alpha_opt", &solve_alpha_opt);
  m.def("gamma_from_bits", &gamma_from_bits, py::arg("bits"), py::arg("loading_factor") = 4.0);
  m.def("upper_bound", &upper_bound);

  py::class_<RdRow>(m, "RdRow")
      .def_readonly("bits", &RdRow::bits)
      .def_readonly("lam", &RdRow::lambda)
      .def_readonly("gamma", &RdRow::gamma)
      .def_readonly("distortion", &RdRow::distortion)
      .def_readonly("distortion_uniform", &RdRow::distortion_uniform)
      .def_readonly("bound", &RdRow::bound)
      .def_readonly("theorem3_residual", &RdRow::theorem3_residual)
      .def_readonly("root_residual", &RdRow::root_residual);
  m.def("rd_curve", &rd_curve, py::arg("p_base"), py::arg("bits"), py::arg("lambdas"),
        py::arg("loading_factor") = 4.0, py::arg("workers") = 1,
        py::call_guard<py::gil_scoped_release>());

  py::class_<FitReport>(m, "FitReport")
      .def_readonly("fitted", &FitReport::fitted)
      .def_readonly("method", &FitReport::method)
      .def_readonly("achieved_mse", &FitReport::achieved_mse)
      .def_readonly("ideal_mse", &FitReport::ideal_mse)
      .def_readonly("norm_sq", &FitReport::norm_sq)
      .def_readonly("feasible", &FitReport::feasible)
      .def("loss_db", &FitReport::loss_db);
  py::class_<FirFit>(m, "FirFit")
      .def_property_readonly("taps", [](const FirFit& f) { return f.filter.taps; })
      .def_readonly("objective", &FirFit::objective)
      .def_readonly("norm_sq", &FirFit::norm_sq)
      .def_readonly("kkt_multiplier", &FirFit::kkt_multiplier)
      .def_readonly("stationarity_residual", &FirFit::stationarity_residual)
      .def_readonly("slack", &FirFit::slack);

  m.def("yule_walker_fit", &yule_walker_fit);
  m.def("norm_constrained_fir",
        py::overload_cast<const AmplitudeResponse&, std::size_t, double>(&norm_constrained_fir));
  m.def("evaluate_fit", &evaluate_fit, py::arg("fit"), py::arg("p"), py::arg("gamma"),
        py::arg("ideal_mse"), py::arg("method") = "external");

  m.def("quantize_midrise", [](double xi, double step, double saturation) {
    const QuantizedSample q = quantize_midrise(xi, MidRiseQuantizer(step, saturation));
    return py::make_tuple(q.value, q.overloaded);
  });
  m.def("discretize_plant", &discretize_plant, py::arg("plant"), py::arg("lam") = 1);

  m.def("default_config_json", [] { return config_to_json(default_config()).dump(); });
  m.def("config_hash", [](const std::string& text) { return config_hash(config_from_string(text)); });

  m.def(
      "run_design",
      [](const std::string& config, const std::string& out) {
        return cmd_design(context(config, out)).dump();
      },
      py::arg("config") = "", py::arg("out") = ".");
  m.def(
      "run_fit",
      [](const std::string& config, const std::string& out) {
        return cmd_fit(context(config, out)).loss_db();
      },
      py::arg("config") = "", py::arg("out") = ".");
  m.def(
      "run_simulate",
      [](const std::string& config, const std::string& out) {
        py::gil_scoped_release release;
        return cmd_simulate(context(config, out)).dump();
      },
      py::arg("config") = "", py::arg("out") = ".");
}
