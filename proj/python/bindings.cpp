#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ensobridge/assimilator.hpp"
#include "ensobridge/curriculum.hpp"
#include "ensobridge/diagnostics.hpp"
#include "ensobridge/idealized.hpp"
#include "ensobridge/latentcodec.hpp"
#include "ensobridge/pipeline.hpp"

namespace py = pybind11;
namespace eb = ensobridge;
namespace pl = ensobridge::pipeline;

namespace {

pl::RunConfig make_config(const std::map<std::string, std::string>& options) {
  pl::RunConfig cfg;
  for (const auto& [k, v] : options) pl::set_option(cfg, k, v);
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Core numerics and pipeline stages";
  py::register_exception<eb::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<eb::DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<eb::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("set_thread_count", &eb::set_thread_count);

  m.def("gaspari_cohn", &eb::assim::gaspari_cohn, py::arg("r"), py::arg("c"));
  m.def("build_localization", &eb::assim::build_localization, py::arg("n_l"), py::arg("positions"),
        py::arg("block_lengths"), py::arg("c"));
  m.def("inflate", &eb::assim::inflate, py::arg("ensemble"), py::arg("alpha"),
        "Members are columns; returns mean + alpha (x - mean).");
  m.def(
      "robust_inverse",
      [](const Eigen::MatrixXd& S, double cond_threshold, double rel_cutoff) {
        eb::assim::AssimConfig c;
        c.cond_threshold = cond_threshold;
        c.svd_rel_cutoff = rel_cutoff;
        auto r = eb::assim::robust_inverse(S, c);
        return py::make_tuple(r.inverse, r.nugget_applied);
      },
      py::arg("S"), py::arg("cond_threshold") = 1e10, py::arg("rel_cutoff") = 1e-6);
  m.def(
      "enkf_analysis",
      [](const Eigen::MatrixXd& forecast, const Eigen::VectorXd& y, const Eigen::VectorXd& R, double alpha,
         std::uint64_t seed, std::uint64_t cycle, bool perturb) {
        eb::assim::ObservationModel obs;
        obs.n_o = static_cast<int>(y.size());
        obs.R = R;
        eb::assim::AssimConfig c;
        c.alpha = alpha;
        c.seed = seed;
        c.perturb_obs = perturb;
        return eb::assim::enkf_analysis(forecast, y, obs, c, cycle);
      },
      py::arg("forecast"), py::arg("y"), py::arg("R"), py::arg("alpha") = 1.09, py::arg("seed") = 11,
      py::arg("cycle") = 0, py::arg("perturb") = true);

  m.def(
      "curriculum_probability",
      [](int e, double p0, double p_max, int e_f) { return eb::surrogate::curriculum_probability(e, {p0, p_max, e_f}); },
      py::arg("epoch"), py::arg("p0") = 0.0, py::arg("p_max") = 0.6, py::arg("e_f") = 100);
  m.def("correlation_matrix", &eb::latent::correlation_matrix, py::arg("Z"), py::arg("Y"), py::arg("eps") = 1e-8);

  m.def(
      "simulate_cfy22",
      [](double years, std::uint64_t seed) {
        eb::idealized::SimulationOptions o;
        o.years = years;
        o.seed = seed;
        const auto t = eb::idealized::simulate_cfy22({}, o);
        py::dict d;
        d["T_C"] = t.T_C;
        d["T_E"] = t.T_E;
        d["I"] = t.I;
        return d;
      },
      py::arg("years"), py::arg("seed") = 1);

  m.def(
      "classify_events",
      [](const std::vector<std::pair<int, int>>& time, const std::vector<double>& n3, const std::vector<double>& n4) {
        std::vector<eb::fieldkit::YearMonth> t;
        for (auto [y, mo] : time) t.push_back({y, mo});
        return eb::diagnostics::to_json(eb::diagnostics::classify_events(t, n3, n4)).dump();
      },
      py::arg("time"), py::arg("nino3"), py::arg("nino4"));

  m.def("default_config", []() { return pl::format_config(pl::RunConfig{}); });
  m.def("generate", [](const std::map<std::string, std::string>& o) {
    const auto r = pl::cmd_generate(make_config(o));
    return std::map<std::string, std::string>{{"om", r.om_hash}, {"reference", r.rea_hash}, {"obs", r.obs_hash}};
  });
  m.def("train_codec", [](const std::map<std::string, std::string>& o) { return pl::cmd_train_codec(make_config(o)).dump(); });
  m.def("train_surrogate",
        [](const std::map<std::string, std::string>& o) { return pl::cmd_train_surrogate(make_config(o)).dump(); });
  m.def(
      "assimilate",
      [](const std::map<std::string, std::string>& o, const std::string& name) {
        return pl::cmd_assimilate(make_config(o), name).string();
      },
      py::arg("options"), py::arg("name") = "bridged");
  m.def(
      "scenario",
      [](const std::map<std::string, std::string>& o, const std::string& regime) {
        return pl::cmd_scenario(make_config(o), regime).dump();
      },
      py::arg("options"), py::arg("regime") = "all");
  m.def(
      "diagnose",
      [](const std::string& run, const std::string& reference, std::optional<std::string> baseline) {
        std::optional<std::filesystem::path> b;
        if (baseline) b = *baseline;
        return pl::cmd_diagnose(run, reference, b).dump();
      },
      py::arg("run"), py::arg("reference"), py::arg("baseline") = py::none());
}
