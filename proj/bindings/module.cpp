#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kktrace/dynamics.hpp"
#include "kktrace/geometry.hpp"
#include "kktrace/lie.hpp"
#include "kktrace/reduction.hpp"
#include "kktrace/scenario.hpp"
#include "kktrace/spectrum.hpp"
#include "kktrace/trace.hpp"

namespace py = pybind11;
using namespace kktrace;

namespace {

std::shared_ptr<const GroupData> make_group(const std::string& name) {
  if (name == "U1" || name == "U(1)")
    return std::make_shared<GroupData>(GroupData::u1());
  if (name == "SU2" || name == "SU(2)")
    return std::make_shared<GroupData>(GroupData::su2());
  return std::make_shared<GroupData>(GroupData::from_json_text(name));
}

}  // namespace

PYBIND11_MODULE(_kktrace, m) {
  m.doc() = "stationary Kaluza-Klein trace-formula toolkit";

  py::register_exception<Error>(m, "KktraceError");

  m.def("weyl_dimension",
        [](const std::string& group, const std::vector<double>& lambda0, int mm) {
          auto g = make_group(group);
          Weight lam = Eigen::Map<const Eigen::VectorXd>(lambda0.data(), lambda0.size());
          return weyl_dimension(*g, {lam, mm});
        },
        py::arg("group"), py::arg("lambda0"), py::arg("m"));

  m.def("casimir_eigenvalue",
        [](const std::string& group, const std::vector<double>& lambda0, int mm) {
          auto g = make_group(group);
          Weight lam = Eigen::Map<const Eigen::VectorXd>(lambda0.data(), lambda0.size());
          return casimir_eigenvalue(*g, {lam, mm});
        },
        py::arg("group"), py::arg("lambda0"), py::arg("m"));

  m.def("character",
        [](const std::string& group, const std::vector<double>& lambda0, int mm,
           const std::vector<double>& angles) {
          auto g = make_group(group);
          Weight lam = Eigen::Map<const Eigen::VectorXd>(lambda0.data(), lambda0.size());
          Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(angles.data(), angles.size());
          return character(*g, {lam, mm}, a);
        },
        py::arg("group"), py::arg("lambda0"), py::arg("m"), py::arg("angles"));

  py::class_<ModelSpec>(m, "ModelSpec")
      .def_static("from_json", &ModelSpec::from_json_text)
      .def_static("from_file", &ModelSpec::from_json_file)
      .def_readonly("name", &ModelSpec::name)
      .def("orbit_radius", &ModelSpec::orbit_radius)
      .def("charge_dim", &ModelSpec::charge_dim);

  m.def("hamiltonian",
        [](const ModelSpec& model, double x, double p, const Eigen::VectorXd& q) {
          return hamiltonian_hz(model, PhasePoint{x, p, q});
        },
        py::arg("model"), py::arg("x"), py::arg("p"), py::arg("q"));

  m.def("null_defect",
        [](const ModelSpec& model, double tau, double x, double p,
           const Eigen::VectorXd& q) { return null_defect(model, tau, x, p, q); },
        py::arg("model"), py::arg("tau"), py::arg("x"), py::arg("p"), py::arg("q"));

  m.def("integrate",
        [](const ModelSpec& model, double x, double p, const Eigen::VectorXd& q,
           double T, double tol) {
          PhasePoint z0 = make_phase_point(model, x, p, q);
          IntegrateOptions opts;
          opts.tol = tol;
          FlowState fs = integrate(model, z0, T, opts);
          py::dict out;
          out["x"] = fs.point.x;
          out["p"] = fs.point.p;
          out["q"] = fs.point.q;
          out["fiber_drift"] = fs.fiber_drift;
          out["energy_drift"] = fs.report.energy;
          out["charge_drift"] = fs.report.charge_radius;
          return out;
        },
        py::arg("model"), py::arg("x"), py::arg("p"), py::arg("q"), py::arg("T"),
        py::arg("tol") = 1e-10);

  m.def("flat_spectrum",
        [](const std::string& group, const std::vector<double>& lambda0,
           double alpha, double beta, int mm, double lo, double hi) {
          FlatParams fp;
          fp.group = make_group(group);
          fp.lambda0 = Eigen::Map<const Eigen::VectorXd>(lambda0.data(), lambda0.size());
          fp.alpha = alpha;
          fp.beta = beta;
          SpectrumTable t = flat_spectrum(fp, mm, lo, hi);
          std::vector<std::pair<double, long>> out;
          for (const auto& e : t.eigenvalues) out.emplace_back(e.lambda, e.multiplicity);
          return out;
        },
        py::arg("group"), py::arg("lambda0"), py::arg("alpha"), py::arg("beta"),
        py::arg("m"), py::arg("window_lo"), py::arg("window_hi"));

  m.def("generic_spectrum_1d",
        [](const ModelSpec& model, int mm, double lo, double hi, int grid) {
          Spectrum1dOptions opts;
          opts.grid = grid;
          SpectrumTable t = generic_spectrum_1d(model, mm, lo, hi, opts);
          std::vector<std::pair<double, long>> out;
          for (const auto& e : t.eigenvalues) out.emplace_back(e.lambda, e.multiplicity);
          return out;
        },
        py::arg("model"), py::arg("m"), py::arg("window_lo"), py::arg("window_hi"),
        py::arg("grid") = 128);

  m.def("energy_surface_volume",
        [](const ModelSpec& model, double E, std::uint64_t seed, long max_samples,
           double target_rel_se) {
          VolumeSamplerConfig cfg;
          cfg.seed = seed;
          cfg.max_samples = max_samples;
          cfg.target_rel_se = target_rel_se;
          VolumeEstimate v = energy_surface_volume(model, E, cfg);
          return std::make_pair(v.value, v.std_error);
        },
        py::arg("model"), py::arg("E"), py::arg("seed") = 1,
        py::arg("max_samples") = 20000000L, py::arg("target_rel_se") = 5e-3);

  m.def("find_periodic_orbits",
        [](const ModelSpec& model, double E, const std::vector<int>& windings) {
          OrbitSearchConfig cfg;
          cfg.windings = windings;
          auto atlas = find_periodic_orbits(model, E, cfg);
          py::list out;
          for (const auto& o : atlas) {
            py::dict d;
            d["T"] = o.T;
            d["T_primitive"] = o.T_primitive;
            d["winding"] = o.winding;
            d["holonomy"] = o.holonomy;
            d["det_I_minus_P"] = o.det_I_minus_P;
            d["residual"] = o.residual;
            d["family"] = o.component_kind == ComponentKind::Family;
            out.append(d);
          }
          return out;
        },
        py::arg("model"), py::arg("E"), py::arg("windings") = std::vector<int>{1, -1});

  m.def("run_scenario",
        [](const std::string& path, const std::string& outdir) {
          RunOptions opts;
          opts.output_dir = outdir;
          ScenarioResult r = run_scenario(path, opts);
          py::dict out;
          out["name"] = r.name;
          out["pass"] = r.pass;
          out["error"] = r.error;
          out["exit_code"] = exit_code_for(r);
          py::list checks;
          for (const auto& c : r.checks) {
            py::dict cd;
            cd["name"] = c.name;
            cd["value"] = c.value;
            cd["threshold"] = c.threshold;
            cd["pass"] = c.pass;
            cd["criterion"] = c.criterion;
            checks.append(cd);
          }
          out["checks"] = checks;
          return out;
        },
        py::arg("path"), py::arg("outdir") = "out");
}
