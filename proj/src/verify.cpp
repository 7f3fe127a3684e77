#include "khessian/verify.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "khessian/errors.hpp"

namespace khess {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

bool on_boundary(const SolutionSample& s) { return s.region != SampleRegion::interior; }

double decay_power(const HessianOrder& order) { return 2.0 * order.n / order.k; }

}  // namespace

// ---- sample extraction --------------------------------------------------------------------------------

SolutionSamples samples_from_profile(const RadialProfile& p, double mesh) {
  SolutionSamples out;
  out.n = p.n;
  out.k = p.k;
  out.mesh = mesh;
  const int m = p.size();
  for (int i = 0; i < m; ++i) {
    Point z = Point::Zero(2 * p.n);
    z(0) = std::sqrt(p.rho(i));
    const ScalarJet j = radial_jet(z, p.f(i), p.fp(i), p.fpp(i));
    const SampleRegion region =
        i == 0 ? SampleRegion::boundary_inner : (i == m - 1 ? SampleRegion::boundary_outer : SampleRegion::interior);
    out.samples.push_back({z, j.value, j.grad, j.complex_hessian(), region});
  }
  return out;
}

SolutionSamples samples_from_grid(const GridField& field, int k) {
  SolutionSamples out;
  out.n = 2;
  out.k = k;
  out.mesh = field.h();
  const double r = field.r();
  out.samples.reserve(field.unknown_count());
  for (int id = 0; id < field.unknown_count(); ++id) {
    const int node = field.node_of_unknown(id);
    const Point z = field.position(node);
    SampleRegion region = SampleRegion::interior;
    if (field.boundary_layer(id)) {
      // The arm that is cut first says which boundary this layer node belongs to.
      double best = kInf;
      for (int slot = 0; slot < 2 * kGridDirections; ++slot)
        if (const GridCut* c = field.cut(id, slot)) {
          const auto dir = grid_direction(slot / 2);
          double len = 0.0;
          for (int a = 0; a < 4; ++a) len += dir[a] * dir[a];
          const double dist = c->theta * std::sqrt(len);
          if (dist < best) {
            best = dist;
            const int sign = slot % 2 == 0 ? 1 : -1;
            Point y = z;
            for (int a = 0; a < 4; ++a) y(a) += sign * dir[a] * c->theta * field.h();
            region = y.norm() <= r * (1.0 + 1e-6) + 1e-3 * field.h() ? SampleRegion::boundary_inner
                                                                        : SampleRegion::boundary_outer;
          }
        }
    }
    out.samples.push_back({z, field.values()[node], discrete_gradient(field, id),
                           discrete_complex_hessian(field, id).entries(), region});
  }
  return out;
}

SolutionSamples samples_from_barrier(const BarrierFunction& barrier, const HessianOrder& order,
                                     const Eigen::VectorXd& rho) {
  SolutionSamples out;
  out.n = order.n;
  out.k = order.k;
  const int m = static_cast<int>(rho.size());
  for (int i = 0; i < m; ++i) {
    Point z = Point::Zero(2 * order.n);
    z(0) = std::sqrt(rho(i));
    const ScalarJet j = barrier(z);
    const SampleRegion region =
        i == 0 ? SampleRegion::boundary_inner : (i == m - 1 ? SampleRegion::boundary_outer : SampleRegion::interior);
    out.samples.push_back({z, j.value, j.grad, j.complex_hessian(), region});
  }
  return out;
}

// ---- pointwise estimates ------------------------------------------------------------------------------

SandwichResult check_sandwich(const SolutionSamples& u, const DomainSpec& domain, const HessianOrder& order) {
  const BarrierFunction w = make_w(domain, order);
  const BarrierFunction sup = make_supersolution(domain, order);
  const BarrierFunction sub =
      subsolution_from_constants(domain, order, glue_constants_without_radius(domain, order));
  SandwichResult r{-kInf, -kInf, -kInf, -kInf};
  for (const auto& s : u.samples) {
    r.lower_slack = std::max(r.lower_slack, w.value(s.z) - s.value);
    r.upper_slack = std::max(r.upper_slack, s.value - sup.value(s.z));
    r.sub_slack = std::max(r.sub_slack, sub.value(s.z) - s.value);
  }
  r.slack = std::max(r.lower_slack, r.upper_slack);
  return r;
}

GradientBounds check_gradient_bounds(const SolutionSamples& u, const HessianOrder& order) {
  GradientBounds g{0.0, kInf};
  const double q = decay_power(order) - 1.0;
  for (const auto& s : u.samples) {
    const double v = s.grad.norm() * std::pow(s.z.norm(), q);
    g.C_upper = std::max(g.C_upper, v);
    g.c0_lower = std::min(g.c0_lower, v);
  }
  return g;
}

double p_quantity(double grad_norm, double value, const HessianOrder& order) {
  if (!(value < 0.0)) throw PreconditionError("P quantity needs u < 0");
  const double a = (2.0 * order.n - order.k) / (order.n - order.k);
  return grad_norm * grad_norm * std::pow(-value, -a);
}

double check_P_max_principle(const SolutionSamples& u, const HessianOrder& order) {
  double interior = 0.0, boundary = 0.0;
  for (const auto& s : u.samples) {
    const double P = p_quantity(s.grad.norm(), s.value, order);
    double& slot = on_boundary(s) ? boundary : interior;
    slot = std::max(slot, P);
  }
  if (!(boundary > 0.0)) throw PreconditionError("P quantity: no boundary samples");
  return interior / boundary;
}

double PQuantityParams::sigma_cap(const HessianOrder& order) {
  const double n = order.n, k = order.k;
  return n * (n - k) / (8.0 * (2.0 * n - k) * (2.0 * n - k));
}

PQuantityParams PQuantityParams::standard(const SolutionSamples& u, const HessianOrder& order,
                                          double sigma_fraction, unsigned seed) {
  if (!(sigma_fraction > 0.0 && sigma_fraction <= 1.0)) throw DomainError("sigma fraction must lie in (0, 1]");
  PQuantityParams p;
  p.exponent = (2.0 * order.n - order.k) / (order.n - order.k);
  double pmax = 0.0;
  for (const auto& s : u.samples) pmax = std::max(pmax, p_quantity(s.grad.norm(), s.value, order));
  p.M = 2.0 * pmax + 1.0;
  p.sigma = sigma_fraction * sigma_cap(order);
  p.directions = xi_directions(order.n, 16, seed);
  return p;
}

std::vector<Eigen::VectorXcd> xi_directions(int n, int count, unsigned seed) {
  using C = std::complex<double>;
  std::vector<Eigen::VectorXcd> dirs;
  auto push = [&](Eigen::VectorXcd v) {
    if (static_cast<int>(dirs.size()) < count) dirs.push_back(v / v.norm());
  };
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
    e(j) = 1.0;
    push(e);
  }
  for (int j = 0; j < n; ++j)
    for (int l = j + 1; l < n; ++l)
      for (C c : {C(1, 0), C(-1, 0), C(0, 1), C(0, -1)}) {
        Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
        e(j) = 1.0;
        e(l) = c;
        push(e);
      }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  while (static_cast<int>(dirs.size()) < count) {
    Eigen::VectorXcd e(n);
    for (int j = 0; j < n; ++j) e(j) = C(g(rng), g(rng));
    push(e);
  }
  return dirs;
}

HQuantityResult check_H_quantity(const SolutionSamples& u, const HessianOrder& order, const PQuantityParams& params) {
  if (params.sigma > PQuantityParams::sigma_cap(order) * (1.0 + 1e-12))
    throw ConfigurationError("sigma exceeds n(n-k)/(8(2n-k)^2)");
  const double b = static_cast<double>(order.n) / (order.n - order.k);
  HQuantityResult out{-kInf, -kInf, -kInf, -kInf};
  std::vector<double> in_max(params.directions.size(), -kInf), bd_max(params.directions.size(), -kInf);
  double in_eig = -kInf, bd_eig = -kInf;
  for (const auto& s : u.samples) {
    const double P = p_quantity(s.grad.norm(), s.value, order);
    if (!(params.M - P > 0.0)) throw PreconditionError("H quantity needs M > P");
    const double weight = std::pow(-s.value, -b) * std::pow(params.M - P, -params.sigma);
    const bool bd = on_boundary(s);
    for (std::size_t d = 0; d < params.directions.size(); ++d) {
      const Eigen::VectorXcd& xi = params.directions[d];
      // u_{ξξ̄} = Σ u_{j k̄} ξ_j ξ̄_k
      const double uxx = (xi.transpose() * s.hess * xi.conjugate()).value().real();
      double& slot = bd ? bd_max[d] : in_max[d];
      slot = std::max(slot, uxx * weight);
    }
    const double lmax = hermitian_eigenvalues(HermitianMatrix(s.hess)).values().maxCoeff();
    double& eig_slot = bd ? bd_eig : in_eig;
    eig_slot = std::max(eig_slot, lmax * weight);
  }
  for (std::size_t d = 0; d < params.directions.size(); ++d) {
    out.excess = std::max(out.excess, in_max[d] - bd_max[d]);
    out.interior_max = std::max(out.interior_max, in_max[d]);
    out.boundary_max = std::max(out.boundary_max, bd_max[d]);
  }
  out.excess_eigen = in_eig - bd_eig;
  return out;
}

double check_hessian_decay(const SolutionSamples& u, const HessianOrder& order) {
  double c = 0.0;
  const double q = decay_power(order);
  for (const auto& s : u.samples) c = std::max(c, s.hess.norm() * std::pow(s.z.norm(), q));
  return c;
}

// ---- G barrier ----------------------------------------------------------------------------------------

GBarrierParams GBarrierParams::measured(const SolutionSamples& u, const DomainSpec& domain,
                                        const HessianOrder& order) {
  double c_outer = kInf, c2 = kInf;
  const double p = order.exponent();
  for (const auto& s : u.samples) {
    if (s.region == SampleRegion::boundary_outer) c_outer = std::min(c_outer, s.grad.norm());
    if (s.region == SampleRegion::boundary_inner)
      c2 = std::min(c2, s.z.norm() * s.grad.norm() / std::pow(s.z.norm(), p));
  }
  if (!std::isfinite(c_outer) || !std::isfinite(c2)) throw PreconditionError("G barrier: missing boundary samples");
  GBarrierParams g;
  g.c1 = c_outer * starshape_constant(domain, domain.boundary_samples);
  g.c2 = c2;
  g.A = 0.5 * std::min(0.5 * g.c1, g.c2);
  g.B = 0.5 * g.c1 / (2.0 * domain.R0 * domain.R0);
  g.epsilon2 = binomial(order.n, order.k) * std::pow(g.B / (2.0 + g.A), order.k);
  g.r5 = std::pow(g.c2 / (2.0 * g.B), order.k / (2.0 * order.n));
  return g;
}

GBarrierResult check_G_barrier(const SolutionSamples& u, const DomainSpec& domain, const HessianOrder& order,
                               const GBarrierParams& g, double epsilon, double r) {
  if (u.n != order.n || u.k != order.k) throw ValidationError("G barrier: samples were computed for another order");
  if (!domain.starshaped) throw ConfigurationError("G barrier requires a starshaped domain (starshaped = false)");
  std::vector<std::string> violated;
  if (!(g.A <= std::min(0.5 * g.c1, g.c2))) violated.push_back("A <= min{c1/2, c2}");
  if (!(g.B <= g.c1 / (2.0 * domain.R0 * domain.R0))) violated.push_back("B <= c1/(2 R0^2)");
  if (!(epsilon < g.epsilon2)) violated.push_back("epsilon < epsilon2");
  if (!(r <= g.r5)) violated.push_back("r <= r5");
  if (!violated.empty()) {
    std::string msg = "G barrier constants inadmissible:";
    for (const auto& v : violated) msg += " " + v + ";";
    throw ConfigurationError(msg);
  }
  GBarrierResult out{kInf, kInf, kInf, true};
  double gmax = 0.0;
  for (const auto& s : u.samples) {
    const double G = s.z.dot(s.grad) + g.A * s.value - g.B * s.z.squaredNorm();
    gmax = std::max(gmax, std::abs(G));
    out.G_min = std::min(out.G_min, G);
    double& slot = on_boundary(s) ? out.G_min_boundary : out.G_min_interior;
    slot = std::min(slot, G);
  }
  const double tol = 1e-9 * std::max(1.0, gmax) + 5.0 * u.mesh * u.mesh * gmax;
  out.attained_on_boundary = out.G_min_interior >= out.G_min_boundary - tol;
  return out;
}

// ---- uniqueness and convergence -------------------------------------------------------------------------

double check_uniqueness_scaling(const SolutionSamples& u1, const SolutionSamples& u2, double r0) {
  if (u1.samples.size() != u2.samples.size()) throw ValidationError("uniqueness check: sample sets differ in size");
  double gap = 0.0;
  for (std::size_t i = 0; i < u1.samples.size(); ++i) {
    const auto& a = u1.samples[i];
    const auto& b = u2.samples[i];
    if ((a.z - b.z).norm() > 1e-12 * std::max(1.0, a.z.norm()))
      throw ValidationError("uniqueness check: sample points differ");
    if (a.z.norm() >= r0) gap = std::max(gap, std::abs(a.value - b.value));
  }
  return gap;
}

double scaling_probe(const SolutionSamples& u, const HessianOrder& order, double r0, double t) {
  double lo = kInf, hi = -kInf;
  for (const auto& s : u.samples) {
    if (s.z.norm() < r0) continue;
    const double v = (1.0 - t) * (s.value + std::pow(s.z.norm(), order.exponent()));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return hi - lo;
}

bool CauchyGaps::decreasing(double slack) const {
  for (std::size_t j = 1; j < c0.size(); ++j)
    if (c0[j] > (1.0 + slack) * c0[j - 1] || c1[j] > (1.0 + slack) * c1[j - 1]) return false;
  return true;
}

bool CauchyGaps::strictly_decreasing() const {
  for (std::size_t j = 1; j < c0.size(); ++j)
    if (!(c0[j] < c0[j - 1]) || !(c1[j] < c1[j - 1])) return false;
  return true;
}

CauchyGaps cauchy_convergence_study(const std::vector<RadialProfile>& solves, const HessianOrder& order, double r0,
                                    double outer_radius, int compare_nodes) {
  if (solves.size() < 2) throw ConfigurationError("convergence study needs at least two solves");
  const double lo = r0 * r0, hi = outer_radius * outer_radius;
  for (const auto& s : solves)
    if (s.rho(0) > lo * (1.0 + 1e-12) || s.rho(s.size() - 1) < hi * (1.0 - 1e-12))
      throw ConfigurationError("convergence study: every solve must cover K = {r0 <= |z| <= R}");
  const double p = order.exponent();
  const double shift = std::pow(outer_radius, p) - 1.0;
  auto grad_norm = [](const RadialProfile& s, double rho) { return 2.0 * std::sqrt(rho) * s.slope_at(rho); };
  CauchyGaps g;
  for (std::size_t j = 0; j + 1 <= solves.size(); ++j) {
    double c0 = 0.0, c1 = 0.0, l0 = 0.0, l1 = 0.0;
    for (int i = 0; i <= compare_nodes; ++i) {
      const double rho = lo + (hi - lo) * i / compare_nodes;
      if (j + 1 < solves.size()) {
        c0 = std::max(c0, std::abs(solves[j].value_at(rho) - solves[j + 1].value_at(rho)));
        c1 = std::max(c1, std::abs(grad_norm(solves[j], rho) - grad_norm(solves[j + 1], rho)));
      } else {
        const double lim = -std::pow(rho, p / 2.0) + shift;
        const double lim_grad = 2.0 * std::sqrt(rho) * (-p / 2.0) * std::pow(rho, p / 2.0 - 1.0);
        l0 = std::max(l0, std::abs(solves[j].value_at(rho) - lim));
        l1 = std::max(l1, std::abs(grad_norm(solves[j], rho) - lim_grad));
      }
    }
    if (j + 1 < solves.size()) {
      g.c0.push_back(c0);
      g.c1.push_back(c1);
    } else {
      g.limit_c0 = l0;
      g.limit_c1 = l1;
    }
  }
  return g;
}

CauchyGaps grid_cauchy_study(const std::vector<const GridField*>& solves, const HessianOrder& order, double r0,
                             std::optional<double> ball_radius) {
  if (solves.size() < 2) throw ConfigurationError("convergence study needs at least two solves");
  if (order.n != 2) throw ConfigurationError("grid convergence study needs n = 2");
  const GridField& first = *solves.front();
  for (const GridField* f : solves)
    if (f->extent() != first.extent() || std::abs(f->h() - first.h()) > 1e-14 * first.h())
      throw ConfigurationError("grid convergence study: all solves must share one lattice");
  const double p = order.exponent();
  auto gradient_at = [](const GridField& f, int node) {
    const int id = f.unknown_of(node);
    return id >= 0 ? discrete_gradient(f, id).norm() : kNaN;
  };
  CauchyGaps g;
  for (std::size_t j = 0; j < solves.size(); ++j) {
    const GridField& a = *solves[j];
    double c0 = 0.0, c1 = 0.0;
    for (int node = 0; node < a.node_count(); ++node) {
      if (a.kind(node) != NodeKind::interior) continue;
      const Point z = a.position(node);
      if (z.norm() < r0) continue;
      if (j + 1 < solves.size()) {
        const GridField& b = *solves[j + 1];
        if (b.kind(node) != NodeKind::interior) continue;
        c0 = std::max(c0, std::abs(a.values()[node] - b.values()[node]));
        c1 = std::max(c1, std::abs(gradient_at(a, node) - gradient_at(b, node)));
      } else if (ball_radius) {
        const double s = z.norm();
        const double lim = -std::pow(s, p) + std::pow(*ball_radius, p) - 1.0;
        const double lim_grad = -p * std::pow(s, p - 1.0);
        c0 = std::max(c0, std::abs(a.values()[node] - lim));
        c1 = std::max(c1, std::abs(gradient_at(a, node) - lim_grad));
      }
    }
    if (j + 1 < solves.size()) {
      g.c0.push_back(c0);
      g.c1.push_back(c1);
    } else {
      g.limit_c0 = ball_radius ? c0 : kNaN;
      g.limit_c1 = ball_radius ? c1 : kNaN;
    }
  }
  return g;
}

// ---- report ---------------------------------------------------------------------------------------------

std::string EstimateReport::json() const {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::ordered_json j;
  j["schema"] = "khessian.estimate_report/1";
  j["sandwich_slack"] = num(sandwich_slack);
  j["sub_slack"] = num(sub_slack);
  j["grad_decay_C"] = num(grad_decay_C);
  j["grad_lower_c0"] = num(grad_lower_c0);
  j["hessian_decay_C"] = num(hessian_decay_C);
  j["P_interior_over_boundary"] = num(P_interior_over_boundary);
  j["H_excess"] = num(H_excess);
  j["G_min"] = num(G_min);
  j["comparison_violation"] = num(comparison_violation);
  j["cauchy_C1_gap"] = num(cauchy_C1_gap);
  return j.dump(2);
}

EstimateReport estimate_report(const SolutionSamples& u, const DomainSpec& domain, const HessianOrder& order,
                               double epsilon, double r, unsigned seed) {
  EstimateReport rep;
  const SandwichResult sw = check_sandwich(u, domain, order);
  rep.sandwich_slack = sw.slack;
  rep.sub_slack = sw.sub_slack;
  const GradientBounds gb = check_gradient_bounds(u, order);
  rep.grad_decay_C = gb.C_upper;
  rep.grad_lower_c0 = domain.starshaped ? gb.c0_lower : kNaN;
  rep.hessian_decay_C = check_hessian_decay(u, order);
  rep.P_interior_over_boundary = check_P_max_principle(u, order);
  rep.H_excess = check_H_quantity(u, order, PQuantityParams::standard(u, order, 1.0, seed)).excess;
  rep.G_min = kNaN;
  if (domain.starshaped) {
    const GBarrierParams g = GBarrierParams::measured(u, domain, order);
    if (epsilon < g.epsilon2 && r <= g.r5) rep.G_min = check_G_barrier(u, domain, order, g, epsilon, r).G_min;
  }
  rep.comparison_violation = kNaN;
  rep.cauchy_C1_gap = kNaN;
  return rep;
}

}  // namespace khess
