#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <sstream>

#include "khessian/barriers.hpp"
#include "khessian/cli.hpp"
#include "khessian/config.hpp"
#include "khessian/errors.hpp"
#include "khessian/geometry.hpp"
#include "khessian/grid.hpp"
#include "khessian/radial.hpp"
#include "khessian/symm.hpp"
#include "khessian/verify.hpp"

namespace py = pybind11;
using namespace khess;

namespace {

DomainSpec make_domain(const DomainShape& shape, int n, double r0, double R0, double tau0, double C_Omega, double mu0,
                       bool starshaped) {
  DomainSpec d;
  d.shape = shape;
  d.n = n;
  d.r0 = r0;
  d.R0 = R0;
  d.tau0 = tau0;
  d.C_Omega = C_Omega;
  d.mu0 = mu0;
  d.starshaped = starshaped;
  d.validate();
  return d;
}

// Evaluates a barrier at each row of an (m, 2n) array.
Eigen::VectorXd barrier_values(const BarrierFunction& b, const Eigen::MatrixXd& points) {
  Eigen::VectorXd out(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) out[i] = b.value(points.row(i).transpose());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Complex k-Hessian equations with an isolated pole: barriers, solvers and estimate checks.";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<SingularityError>(m, "SingularityError", PyExc_ValueError);
  py::register_exception<ConfigurationError>(m, "ConfigurationError", PyExc_RuntimeError);
  py::register_exception<NonconvergenceError>(m, "NonconvergenceError", PyExc_RuntimeError);

  // symm-core
  m.def("binomial", &binomial, py::arg("n"), py::arg("k"));
  m.def(
      "elem_sym", [](const Eigen::VectorXd& lambda, int k) { return elem_sym(Spectrum(lambda), k); },
      py::arg("lam"), py::arg("k"));
  m.def(
      "elem_sym_all", [](const Eigen::VectorXd& lambda) { return elem_sym_all(Spectrum(lambda)); }, py::arg("lam"));
  m.def(
      "elem_sym_reduced",
      [](const Eigen::VectorXd& lambda, int k, int i) { return elem_sym_reduced(Spectrum(lambda), k, i); },
      py::arg("lam"), py::arg("k"), py::arg("i"));
  m.def(
      "in_gamma_k",
      [](const Eigen::VectorXd& lambda, int k, bool strict, double tol) {
        return in_gamma_k(Spectrum(lambda), k, strict, tol);
      },
      py::arg("lam"), py::arg("k"), py::arg("strict") = true, py::arg("tol") = 0.0);
  m.def(
      "sigma_k_hermitian", [](const ComplexMatrix& a, int k) { return sigma_k_hermitian(HermitianMatrix(a), k); },
      py::arg("a"), py::arg("k"), "S_k of the eigenvalues via principal minors.");
  m.def(
      "hermitian_eigenvalues",
      [](const ComplexMatrix& a) { return hermitian_eigenvalues(HermitianMatrix(a)).values(); }, py::arg("a"));
  m.def("complex_hessian_from_real", &complex_hessian_from_real, py::arg("real_hessian"));

  py::class_<OperatorOrder>(m, "OperatorOrder")
      .def(py::init<int, int>(), py::arg("n"), py::arg("k"))
      .def_readonly("n", &OperatorOrder::n)
      .def_readonly("k", &OperatorOrder::k);
  py::class_<HessianOrder, OperatorOrder>(m, "HessianOrder")
      .def(py::init<int, int>(), py::arg("n"), py::arg("k"))
      .def_property_readonly("exponent", &HessianOrder::exponent);

  // domain-geometry
  py::class_<DomainSpec>(m, "DomainSpec")
      .def_readonly("n", &DomainSpec::n)
      .def_readonly("r0", &DomainSpec::r0)
      .def_readonly("R0", &DomainSpec::R0)
      .def_readonly("tau0", &DomainSpec::tau0)
      .def_readonly("C_Omega", &DomainSpec::C_Omega)
      .def_readonly("mu0", &DomainSpec::mu0)
      .def_readonly("starshaped", &DomainSpec::starshaped)
      .def_property_readonly("kind", &DomainSpec::kind)
      .def("__repr__", [](const DomainSpec& d) { return "<DomainSpec " + d.kind() + " n=" + std::to_string(d.n) + ">"; });
  m.def(
      "ball",
      [](int n, double radius, double r0, double R0, double tau0, double C_Omega, double mu0) {
        return make_domain(Ball{radius}, n, r0, R0, tau0, C_Omega, mu0, true);
      },
      py::arg("n"), py::arg("radius") = 1.0, py::arg("r0") = 0.5, py::arg("R0") = 2.0, py::arg("tau0") = 0.1,
      py::arg("C_Omega") = 1.0, py::arg("mu0") = 0.1);
  m.def(
      "ellipsoid",
      [](int n, const Eigen::VectorXd& axes, double r0, double R0, double tau0, double C_Omega, double mu0) {
        return make_domain(Ellipsoid{axes}, n, r0, R0, tau0, C_Omega, mu0, true);
      },
      py::arg("n"), py::arg("axes"), py::arg("r0") = 0.5, py::arg("R0") = 2.0, py::arg("tau0") = 0.1,
      py::arg("C_Omega") = 1.0, py::arg("mu0") = 0.1);
  m.def("signed_distance", &signed_distance, py::arg("domain"), py::arg("z"));
  m.def("inside", &inside, py::arg("domain"), py::arg("z"));
  m.def(
      "pseudoconvexity_certificate",
      [](const DomainSpec& d, int k, int samples) {
        const CertificateResult c = pseudoconvexity_certificate(d, k, samples);
        return py::make_tuple(c.certified, c.worst_margin);
      },
      py::arg("domain"), py::arg("k"), py::arg("samples") = 256);

  // barriers
  py::class_<GlueConstants>(m, "GlueConstants")
      .def_readonly("a0", &GlueConstants::a0)
      .def_readonly("K0", &GlueConstants::K0)
      .def_readonly("M0", &GlueConstants::M0)
      .def_readonly("delta", &GlueConstants::delta)
      .def_readonly("epsilon0", &GlueConstants::epsilon0)
      .def_readonly("epsilon1", &GlueConstants::epsilon1)
      .def_readonly("r_max", &GlueConstants::r_max);
  m.def(
      "glue_constants",
      [](const DomainSpec& d, const HessianOrder& order) {
        GlueConstants c = glue_constants_without_radius(d, order);
        c.r_max = admissible_radius(d, order);
        return c;
      },
      py::arg("domain"), py::arg("order"), "Barrier constants with r_max filled in.");
  m.def("admissible_radius", py::overload_cast<const DomainSpec&, const HessianOrder&>(&admissible_radius),
        py::arg("domain"), py::arg("order"));
  py::class_<BarrierFunction>(m, "BarrierFunction")
      .def("value", &BarrierFunction::value, py::arg("z"))
      .def("values", &barrier_values, py::arg("points"), "Values at each row of an (m, 2n) array.")
      .def("hessian_spectrum",
           [](const BarrierFunction& b, const Point& z) {
             return hermitian_eigenvalues(HermitianMatrix(b(z).complex_hessian())).values();
           },
           py::arg("z"));
  m.def(
      "subsolution",
      [](const DomainSpec& d, const HessianOrder& order, double r) {
        auto [sub, constants] = make_subsolution(d, order, r);
        return py::make_tuple(sub, constants);
      },
      py::arg("domain"), py::arg("order"), py::arg("r"), "Glued subsolution u̲ and its constants.");
  m.def("supersolution", &make_supersolution, py::arg("domain"), py::arg("order"));
  m.def(
      "fundamental_spectrum",
      [](double rho, const HessianOrder& order) { return fundamental_spectrum(rho, order).values(); },
      py::arg("rho"), py::arg("order"));

  // solvers
  py::class_<ApproxConfig>(m, "ApproxConfig")
      .def(py::init<>())
      .def_readwrite("epsilon", &ApproxConfig::epsilon)
      .def_readwrite("r", &ApproxConfig::r)
      .def_readwrite("boundary_inner", &ApproxConfig::boundary_inner)
      .def_readwrite("boundary_outer", &ApproxConfig::boundary_outer)
      .def_readwrite("newton_tol", &ApproxConfig::newton_tol)
      .def_readwrite("max_iter", &ApproxConfig::max_iter);
  m.def("approx_config", &approx_config, py::arg("domain"), py::arg("order"), py::arg("epsilon"), py::arg("r"));

  py::class_<RadialProfile>(m, "RadialProfile")
      .def_readonly("n", &RadialProfile::n)
      .def_readonly("k", &RadialProfile::k)
      .def_readonly("epsilon", &RadialProfile::epsilon)
      .def_readonly("rho", &RadialProfile::rho)
      .def_readonly("f", &RadialProfile::f)
      .def_readonly("fp", &RadialProfile::fp)
      .def_readonly("fpp", &RadialProfile::fpp)
      .def_readonly("residual", &RadialProfile::residual)
      .def_readonly("newton_iterations", &RadialProfile::newton_iterations)
      .def("value_at", &RadialProfile::value_at, py::arg("rho"))
      .def("slope_at", &RadialProfile::slope_at, py::arg("rho"))
      .def("to_csv", [](const RadialProfile& p) {
        std::ostringstream os;
        write_profile_csv(p, os);
        return os.str();
      });
  m.def(
      "solve_radial",
      [](const ApproxConfig& c, const HessianOrder& order, const DomainSpec& d, int nodes) {
        py::gil_scoped_release release;
        return solve_radial_fd(c, order, d, nodes);
      },
      py::arg("config"), py::arg("order"), py::arg("domain"), py::arg("nodes") = 256);
  m.def(
      "solve_radial_exact",
      [](const ApproxConfig& c, const OperatorOrder& order, const DomainSpec& d, int nodes) {
        return solve_radial_exact(c, order, d).sample(nodes);
      },
      py::arg("config"), py::arg("order"), py::arg("domain"), py::arg("nodes") = 256,
      "Quadrature solution sampled on the log-uniform grid.");

  py::class_<GridSolveStats>(m, "GridSolveStats")
      .def_readonly("stages", &GridSolveStats::stages)
      .def_readonly("newton_iterations", &GridSolveStats::newton_iterations)
      .def_readonly("linear_iterations", &GridSolveStats::linear_iterations)
      .def_readonly("residual_sup", &GridSolveStats::residual_sup)
      .def_readonly("history", &GridSolveStats::history);
  py::class_<GridSolution>(m, "GridSolution")
      .def_readonly("stats", &GridSolution::stats)
      .def_property_readonly("h", [](const GridSolution& s) { return s.field.h(); })
      .def_property_readonly("unknowns", [](const GridSolution& s) { return s.field.unknowns(); })
      .def_property_readonly("positions", [](const GridSolution& s) {
        const GridField& f = s.field;
        Eigen::MatrixXd out(f.unknown_count(), 4);
        for (int id = 0; id < f.unknown_count(); ++id) out.row(id) = f.position(f.node_of_unknown(id)).transpose();
        return out;
      });
  m.def(
      "solve_grid",
      [](const ApproxConfig& c, const HessianOrder& order, const DomainSpec& d, double h) {
        py::gil_scoped_release release;
        return solve_grid(c, order, d, h);
      },
      py::arg("config"), py::arg("order"), py::arg("domain"), py::arg("h"));

  // estimate-verifier
  py::class_<EstimateReport>(m, "EstimateReport")
      .def_readonly("sandwich_slack", &EstimateReport::sandwich_slack)
      .def_readonly("sub_slack", &EstimateReport::sub_slack)
      .def_readonly("grad_decay_C", &EstimateReport::grad_decay_C)
      .def_readonly("grad_lower_c0", &EstimateReport::grad_lower_c0)
      .def_readonly("hessian_decay_C", &EstimateReport::hessian_decay_C)
      .def_readonly("P_interior_over_boundary", &EstimateReport::P_interior_over_boundary)
      .def_readonly("H_excess", &EstimateReport::H_excess)
      .def_readonly("G_min", &EstimateReport::G_min)
      .def("json", &EstimateReport::json);
  m.def(
      "estimate_report",
      [](const RadialProfile& p, const DomainSpec& d, const HessianOrder& order, double r, unsigned seed) {
        const double mesh = p.size() > 1 ? std::log(p.rho[1] / p.rho[0]) : 0.0;  // log-ρ step
        return estimate_report(samples_from_profile(p, mesh), d, order, p.epsilon, r, seed);
      },
      py::arg("profile"), py::arg("domain"), py::arg("order"), py::arg("r"), py::arg("seed") = 23);
  m.def(
      "estimate_report_grid",
      [](const GridSolution& s, const DomainSpec& d, const HessianOrder& order, double epsilon, unsigned seed) {
        return estimate_report(samples_from_grid(s.field, order.k), d, order, epsilon, s.field.r(), seed);
      },
      py::arg("solution"), py::arg("domain"), py::arg("order"), py::arg("epsilon"), py::arg("seed") = 23);

  // cli
  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "khessian_cli");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        py::gil_scoped_release release;
        return cli::run(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs `khessian_cli` with the given arguments and returns its exit code.");
}
