#include "khessian/barriers.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "khessian/errors.hpp"

namespace khess {

std::string to_string(BarrierLabel label) {
  switch (label) {
    case BarrierLabel::subsolution: return "subsolution";
    case BarrierLabel::supersolution: return "supersolution";
    case BarrierLabel::w: return "w";
    case BarrierLabel::rho_term: return "rho_term";
    case BarrierLabel::fundamental: return "fundamental";
    case BarrierLabel::glued: return "glued";
  }
  return "unknown";
}

ScalarJet radial_jet(const Point& z, double f, double fp, double fpp) {
  const Eigen::Index m = z.size();
  return ScalarJet{f, 2.0 * fp * z,
                   2.0 * fp * RealMatrix::Identity(m, m) + 4.0 * fpp * z * z.transpose()};
}

ScalarJet fundamental_solution(const Point& z, const HessianOrder& order) {
  const double rho = z.squaredNorm();
  if (rho == 0.0) throw SingularityError("fundamental solution is singular at z = 0");
  const double q = order.exponent() / 2.0;  // 1 - n/k
  const double f = -std::pow(rho, q);
  const double fp = -q * std::pow(rho, q - 1.0);
  const double fpp = -q * (q - 1.0) * std::pow(rho, q - 2.0);
  return radial_jet(z, f, fp, fpp);
}

Spectrum fundamental_spectrum(double rho, const HessianOrder& order) {
  if (!(rho > 0.0)) throw SingularityError("fundamental spectrum needs rho > 0");
  const double c = static_cast<double>(order.n) / order.k - 1.0;
  const double s = std::pow(rho, -static_cast<double>(order.n) / order.k);
  Eigen::VectorXd lambda = Eigen::VectorXd::Constant(order.n, c * s);
  lambda(order.n - 1) = -c * c * s;
  return Spectrum(lambda);
}

namespace {

double power_p(double x, const HessianOrder& order) { return std::pow(x, order.exponent()); }

double compute_a0(const DomainSpec& d, const HessianOrder& order) {
  return 0.5 * (power_p(1.0 - d.tau0, order) - 1.0) * power_p(d.R0, order);
}

// Smallest M0 > 1 with K0(-μ0/M0 + C_Ω(μ0/M0)²) >= -a0/2. The left side increases with M0.
double solve_m0(double K0, double mu0, double C, double a0) {
  auto holds = [&](double m) {
    const double x = mu0 / m;
    return K0 * (-x + C * x * x) >= -0.5 * a0;
  };
  double hi = 2.0;
  int guard = 0;
  while (!holds(hi)) {
    hi *= 2.0;
    if (++guard > 80)
      throw ConfigurationError("no M0 satisfies K0(-mu0/M0 + C_Omega (mu0/M0)^2) >= -1/4((1-tau0)^p - 1)R0^p");
  }
  double lo = hi / 2.0;
  if (hi == 2.0) {
    lo = 1.0;
  }
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (holds(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

GlueConstants glue_constants_without_radius(const DomainSpec& domain, const HessianOrder& order) {
  if (domain.n != order.n) throw DomainError("domain.n differs from order.n");
  domain.validate();
  GlueConstants c{};
  c.a0 = compute_a0(domain, order);
  const double mu0 = domain.mu0;
  const double collar = mu0 - domain.C_Omega * mu0 * mu0;
  c.K0 = power_p(domain.r0, order) / collar;
  c.delta = std::min(0.5 * c.a0, power_p(domain.R0, order));
  c.M0 = solve_m0(c.K0, mu0, domain.C_Omega, c.a0);
  c.epsilon0 = collar_subharmonicity(domain, order);
  const int k = order.k;
  c.epsilon1 = std::min(binomial(order.n, k) * std::pow(c.a0, k) * std::pow(domain.R0, -2.0 * k),
                        std::pow(c.K0, k) * c.epsilon0);
  c.r_max = 0.0;
  return c;
}

BarrierFunction make_w(const DomainSpec& domain, const HessianOrder& order) {
  const double a0 = compute_a0(domain, order);
  const double shift = power_p(domain.R0, order) - 1.0;
  const double quad = a0 / (domain.R0 * domain.R0);
  return BarrierFunction{[order, shift, quad](const Point& z) {
                           ScalarJet j = fundamental_solution(z, order);
                           const Eigen::Index m = z.size();
                           j.value += shift + quad * z.squaredNorm();
                           j.grad += 2.0 * quad * z;
                           j.hess += 2.0 * quad * RealMatrix::Identity(m, m);
                           return j;
                         },
                         BarrierLabel::w};
}

double SmoothAbsHalf::value(double s) const {
  const double a = std::abs(s);
  if (a >= delta) return 0.5 * a;
  return 3.0 * delta / 16.0 + 3.0 * s * s / (8.0 * delta) - s * s * s * s / (16.0 * delta * delta * delta);
}

double SmoothAbsHalf::d1(double s) const {
  if (s >= delta) return 0.5;
  if (s <= -delta) return -0.5;
  return 3.0 * s / (4.0 * delta) - s * s * s / (4.0 * delta * delta * delta);
}

double SmoothAbsHalf::d2(double s) const {
  if (std::abs(s) >= delta) return 0.0;
  return 0.75 / delta * (1.0 - s * s / (delta * delta));
}

BarrierFunction smooth_max_glue(BarrierFunction g, BarrierFunction h, double delta) {
  if (!(delta > 0.0)) throw DomainError("smooth_max_glue: delta must be positive");
  const SmoothAbsHalf phi{delta};
  return BarrierFunction{[g = std::move(g), h = std::move(h), phi](const Point& z) {
                           const ScalarJet jg = g(z);
                           const ScalarJet jh = h(z);
                           const double s = jg.value - jh.value;
                           const double p1 = phi.d1(s);
                           const double p2 = phi.d2(s);
                           const Eigen::VectorXd diff = jg.grad - jh.grad;
                           ScalarJet out;
                           out.value = 0.5 * (jg.value + jh.value) + phi.value(s);
                           out.grad = (0.5 + p1) * jg.grad + (0.5 - p1) * jh.grad;
                           out.hess = (0.5 + p1) * jg.hess + (0.5 - p1) * jh.hess + p2 * diff * diff.transpose();
                           return out;
                         },
                         BarrierLabel::glued};
}

BarrierFunction subsolution_from_constants(const DomainSpec& domain, const HessianOrder& order,
                                           const GlueConstants& c) {
  const BarrierFunction w = make_w(domain, order);
  const double K0 = c.K0;
  BarrierFunction g{[domain, K0](const Point& z) {
                      ScalarJet j = defining_function(domain, z);
                      j.value = K0 * j.value - 1.0;
                      j.grad *= K0;
                      j.hess *= K0;
                      return j;
                    },
                    BarrierLabel::rho_term};
  const BarrierFunction glued = smooth_max_glue(g, w, c.delta);
  const double mu0 = domain.mu0;
  return BarrierFunction{[domain, w, glued, mu0](const Point& z) {
                           const double d = signed_distance(domain, z);
                           return d > mu0 ? w(z) : glued(z);
                         },
                         BarrierLabel::subsolution};
}

BarrierFunction make_supersolution(const DomainSpec& domain, const HessianOrder& order) {
  const double shift = power_p(domain.r0, order) - 1.0;
  return BarrierFunction{[order, shift](const Point& z) {
                           ScalarJet j = fundamental_solution(z, order);
                           j.value += shift;
                           return j;
                         },
                         BarrierLabel::supersolution};
}

std::vector<Eigen::VectorXd> unit_directions(int m, int count, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Eigen::VectorXd> dirs;
  dirs.reserve(count);
  for (int s = 0; s < count; ++s) {
    Eigen::VectorXd u(m);
    if (s < 2 * m) {
      u.setZero();
      u(s / 2) = (s % 2 == 0) ? 1.0 : -1.0;
    } else {
      for (int i = 0; i < m; ++i) u(i) = gauss(rng);
      u.normalize();
    }
    dirs.push_back(std::move(u));
  }
  return dirs;
}

RadiusCheck check_radius(const DomainSpec& domain, const HessianOrder& order, const BarrierFunction& sub, double r,
                         int directions) {
  const BarrierFunction sup = make_supersolution(domain, order);
  RadiusCheck rc{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                 -std::numeric_limits<double>::infinity()};
  const double half_power = 0.5 * power_p(r, order);
  for (const auto& u : unit_directions(domain.real_dim(), directions)) {
    const Point z = r * u;
    const double s = sub.value(z);
    rc.max_sub_on_sphere = std::max(rc.max_sub_on_sphere, s);
    rc.min_super_minus_sub = std::min(rc.min_super_minus_sub, sup.value(z) - s);
    rc.max_sub_plus_half_power = std::max(rc.max_sub_plus_half_power, s + half_power);
  }
  return rc;
}

double admissible_radius(const DomainSpec& domain, const HessianOrder& order, const BarrierFunction& sub) {
  auto ok = [&](double r) { return check_radius(domain, order, sub, r).ok(); };
  const double r0 = domain.r0;
  if (ok(r0)) return r0;
  double hi = r0;
  double lo = 0.5 * r0;
  int guard = 0;
  while (!ok(lo)) {
    hi = lo;
    lo *= 0.5;
    if (++guard > 60) throw ConfigurationError("admissible_radius: no admissible puncture radius found");
  }
  while (hi - lo > 1e-6 * r0) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

double admissible_radius(const DomainSpec& domain, const HessianOrder& order) {
  const GlueConstants c = glue_constants_without_radius(domain, order);
  return admissible_radius(domain, order, subsolution_from_constants(domain, order, c));
}

std::pair<BarrierFunction, GlueConstants> make_subsolution(const DomainSpec& domain, const HessianOrder& order,
                                                           double r) {
  GlueConstants c = glue_constants_without_radius(domain, order);
  BarrierFunction sub = subsolution_from_constants(domain, order, c);
  c.r_max = admissible_radius(domain, order, sub);
  if (!(r > 0.0 && r <= c.r_max)) {
    std::ostringstream os;
    os << "puncture radius r = " << r << " exceeds r_max = " << c.r_max;
    throw ConfigurationError(os.str());
  }
  return {std::move(sub), c};
}

}  // namespace khess
