#include "khessian/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "khessian/errors.hpp"

namespace khess {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---- ellipsoid closest point ----------------------------------------------------------------------

struct EllipsoidFoot {
  Point y;
  double signed_distance;
};

// Foot point of x on Σ y_i²/a_i² = 1 via the Lagrange parameter t: y_i = a_i² x_i / (a_i² + t),
// F(t) = Σ (a_i x_i / (a_i² + t))² - 1 = 0. F is decreasing and convex on (-a_min², ∞).
EllipsoidFoot ellipsoid_foot(const Eigen::VectorXd& a, const Point& x) {
  const Eigen::Index m = a.size();
  const Eigen::VectorXd a2 = a.cwiseProduct(a);
  const double level = x.cwiseQuotient(a).squaredNorm();
  const double a2min = a2.minCoeff();

  auto F = [&](double t) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double q = a(i) * x(i) / (a2(i) + t);
      s += q * q;
    }
    return s - 1.0;
  };
  auto dF = [&](double t) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double den = a2(i) + t;
      s += -2.0 * a2(i) * x(i) * x(i) / (den * den * den);
    }
    return s;
  };

  const bool inside = level < 1.0;
  Point y(m);
  if (level == 1.0) {
    return {x, 0.0};
  }

  if (inside) {
    // Degenerate medial-axis case: all components along the shortest axes vanish and the
    // remaining terms cannot reach the constraint before t hits -a_min².
    bool min_axis_zero = true;
    for (Eigen::Index i = 0; i < m; ++i)
      if (a2(i) == a2min && x(i) != 0.0) min_axis_zero = false;
    if (min_axis_zero) {
      double rest = 0.0;
      bool finite = true;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (a2(i) == a2min) continue;
        const double yi = a2(i) * x(i) / (a2(i) - a2min);
        rest += yi * yi / a2(i);
        y(i) = yi;
      }
      if (finite && rest <= 1.0) {
        bool placed = false;
        for (Eigen::Index i = 0; i < m; ++i) {
          if (a2(i) != a2min) continue;
          y(i) = placed ? 0.0 : std::sqrt((1.0 - rest) * a2min);
          placed = true;
        }
        return {y, (x - y).norm()};
      }
    }
  }

  double lo = inside ? -a2min : 0.0;
  double hi = inside ? 0.0 : a.maxCoeff() * x.norm();
  double t = inside ? 0.5 * lo : 0.5 * hi;
  for (int it = 0; it < 200; ++it) {
    const double f = F(t);
    if (f > 0.0) lo = t; else hi = t;
    const double d = dF(t);
    double next = t - f / d;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
      t = next;
      break;
    }
    t = next;
    if (hi - lo <= 1e-300) break;
  }
  for (Eigen::Index i = 0; i < m; ++i) y(i) = a2(i) * x(i) / (a2(i) + t);
  // Snap onto the surface (removes the residual of the root solve).
  y /= std::sqrt(y.cwiseQuotient(a).squaredNorm());
  const double dist = (x - y).norm();
  return {y, inside ? dist : -dist};
}

Eigen::VectorXd ellipsoid_normal(const Eigen::VectorXd& a, const Point& y) {
  Eigen::VectorXd g = y.cwiseQuotient(a.cwiseProduct(a));
  return g / g.norm();
}

// ---- level set closest point ----------------------------------------------------------------------

Eigen::VectorXd fd_gradient(const std::function<double(const Point&)>& f, const Point& x, double h) {
  Eigen::VectorXd g(x.size());
  Point p = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    p(i) = x(i) + h;
    const double fp = f(p);
    p(i) = x(i) - h;
    const double fm = f(p);
    p(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

RealMatrix fd_hessian(const std::function<double(const Point&)>& f, const Point& x, double h) {
  const Eigen::Index m = x.size();
  RealMatrix hess(m, m);
  // 4th-order directional second differences along e_a and e_a ± e_b.
  auto second = [&](const Eigen::VectorXd& v) {
    const double f0 = f(x);
    return (-f(x + 2 * h * v) + 16 * f(x + h * v) - 30 * f0 + 16 * f(x - h * v) - f(x - 2 * h * v)) /
           (12 * h * h);
  };
  Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    v.setZero();
    v(a) = 1.0;
    hess(a, a) = second(v);
  }
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = a + 1; b < m; ++b) {
      v.setZero();
      v(a) = 1.0;
      v(b) = 1.0;
      const double plus = second(v);
      v(b) = -1.0;
      const double minus = second(v);
      hess(a, b) = hess(b, a) = 0.25 * (plus - minus);
    }
  return hess;
}

struct LevelSetFoot {
  Point y;
  double signed_distance;
};

LevelSetFoot level_set_foot(const LevelSet& ls, const Point& x) {
  const double h = 1e-6 * ls.bounding_radius;
  Point y = x;
  for (int it = 0; it < 50; ++it) {
    const double f = ls.phi(y);
    const Eigen::VectorXd g = fd_gradient(ls.phi, y, h);
    const double step = f / g.squaredNorm();
    y -= step * g;
    if (std::abs(step) * g.norm() < 1e-15 * ls.bounding_radius) break;
  }
  // Closest point: y - x + μ∇φ(y) = 0, φ(y) = 0.
  const Eigen::Index m = x.size();
  Eigen::VectorXd g = fd_gradient(ls.phi, y, h);
  double mu = (x - y).dot(g) / g.squaredNorm();
  for (int it = 0; it < 30; ++it) {
    g = fd_gradient(ls.phi, y, h);
    const RealMatrix hphi = fd_hessian(ls.phi, y, 1e-4 * ls.bounding_radius);
    Eigen::VectorXd rhs(m + 1);
    rhs.head(m) = -(y - x + mu * g);
    rhs(m) = -ls.phi(y);
    RealMatrix jac = RealMatrix::Zero(m + 1, m + 1);
    jac.topLeftCorner(m, m) = RealMatrix::Identity(m, m) + mu * hphi;
    jac.topRightCorner(m, 1) = g;
    jac.bottomLeftCorner(1, m) = g.transpose();
    const Eigen::VectorXd step = jac.fullPivLu().solve(rhs);
    y += step.head(m);
    mu += step(m);
    if (step.norm() < 1e-14 * ls.bounding_radius) break;
  }
  const double dist = (x - y).norm();
  return {y, ls.phi(x) < 0.0 ? dist : -dist};
}

double level_set_ray_hit(const LevelSet& ls, const Eigen::VectorXd& u) {
  double lo = 0.0, hi = ls.bounding_radius;
  if (!(ls.phi(lo * u) < 0.0) || !(ls.phi(hi * u) > 0.0))
    throw ConfigurationError("level-set domain must satisfy φ(0) < 0 < φ on the bounding sphere");
  for (int it = 0; it < 200 && hi - lo > 1e-15 * ls.bounding_radius; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ls.phi(mid * u) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double ball_extent_min(const DomainSpec& d) {
  return std::visit(Overloaded{[](const Ball& b) { return b.radius; },
                               [](const Ellipsoid& e) { return e.axes.minCoeff(); },
                               [&](const LevelSet&) {
                                 double m = kInf;
                                 for (const auto& bp : boundary_samples(d, d.boundary_samples)) m = std::min(m, bp.y.norm());
                                 return m;
                               }},
                    d.shape);
}

double ball_extent_max(const DomainSpec& d) {
  return std::visit(Overloaded{[](const Ball& b) { return b.radius; },
                               [](const Ellipsoid& e) { return e.axes.maxCoeff(); },
                               [&](const LevelSet&) {
                                 double m = 0.0;
                                 for (const auto& bp : boundary_samples(d, d.boundary_samples)) m = std::max(m, bp.y.norm());
                                 return m;
                               }},
                    d.shape);
}

RealMatrix fd_hessian_of(const DomainSpec& domain, const Point& z, double h,
                         const std::function<double(double)>& of_distance) {
  return fd_hessian([&](const Point& p) { return of_distance(signed_distance(domain, p)); }, z, h);
}

}  // namespace

std::string DomainSpec::kind() const {
  return std::visit(Overloaded{[](const Ball&) { return std::string("ball"); },
                               [](const Ellipsoid&) { return std::string("ellipsoid"); },
                               [](const LevelSet&) { return std::string("levelset"); }},
                    shape);
}

void DomainSpec::validate() const {
  auto fail = [](const std::string& what) { throw ConfigurationError("domain: " + what); };
  if (n < 1) fail("n must be >= 1");
  if (!(r0 > 0.0)) fail("r0 must be positive");
  if (!(R0 > 0.0)) fail("R0 must be positive");
  if (!(tau0 > 0.0 && tau0 < 0.5)) fail("tau0 must lie in (0, 1/2)");
  if (!(C_Omega > 0.0)) fail("C_Omega must be positive");
  if (!(mu0 > 0.0 && mu0 < 1.0 / (2.0 * C_Omega))) fail("mu0 must lie in (0, 1/(2 C_Omega))");
  if (const auto* b = std::get_if<Ball>(&shape); b && !(b->radius > 0.0)) fail("ball radius must be positive");
  if (const auto* e = std::get_if<Ellipsoid>(&shape)) {
    if (e->axes.size() != 2 * n) fail("ellipsoid needs 2n semi-axes");
    if (!(e->axes.minCoeff() > 0.0)) fail("ellipsoid semi-axes must be positive");
  }
  if (!(ball_extent_min(*this) > r0)) fail("B_r0 ⊂⊂ Ω violated");
  if (!(ball_extent_max(*this) < (1.0 - tau0) * R0)) fail("Ω ⊂⊂ B_{(1-tau0)R0} violated");
  if (starshaped && !(starshape_constant(*this, boundary_samples) > 0.0))
    fail("starshaped flag set but z·ν <= 0 at a boundary sample");
}

double signed_distance(const DomainSpec& domain, const Point& z) {
  return std::visit(Overloaded{[&](const Ball& b) { return b.radius - z.norm(); },
                               [&](const Ellipsoid& e) { return ellipsoid_foot(e.axes, z).signed_distance; },
                               [&](const LevelSet& ls) { return level_set_foot(ls, z).signed_distance; }},
                    domain.shape);
}

double distance(const DomainSpec& domain, const Point& z) {
  const double sd = signed_distance(domain, z);
  if (sd < -1e-14 * std::max(1.0, z.norm())) throw DomainError("distance: point lies outside Ω̄");
  return std::max(sd, 0.0);
}

BoundaryPoint foot_point(const DomainSpec& domain, const Point& z) {
  return std::visit(
      Overloaded{[&](const Ball& b) {
                   const double s = z.norm();
                   Eigen::VectorXd nu = s > 0 ? Eigen::VectorXd(z / s) : Eigen::VectorXd::Unit(z.size(), 0);
                   return BoundaryPoint{b.radius * nu, nu};
                 },
                 [&](const Ellipsoid& e) {
                   const auto foot = ellipsoid_foot(e.axes, z);
                   return BoundaryPoint{foot.y, ellipsoid_normal(e.axes, foot.y)};
                 },
                 [&](const LevelSet& ls) {
                   const auto foot = level_set_foot(ls, z);
                   Eigen::VectorXd g = fd_gradient(ls.phi, foot.y, 1e-6 * ls.bounding_radius);
                   return BoundaryPoint{foot.y, g / g.norm()};
                 }},
      domain.shape);
}

DistanceJet distance_jet(const DomainSpec& domain, const Point& z) {
  const Eigen::Index m = z.size();
  return std::visit(
      Overloaded{[&](const Ball& b) {
                   const double s = z.norm();
                   if (s == 0.0) return DistanceJet{b.radius, Eigen::VectorXd::Zero(m), RealMatrix::Zero(m, m)};
                   const Eigen::VectorXd u = z / s;
                   return DistanceJet{b.radius - s, -u,
                                      -(RealMatrix::Identity(m, m) - u * u.transpose()) / s};
                 },
                 [&](const Ellipsoid& e) {
                   const auto foot = ellipsoid_foot(e.axes, z);
                   const Eigen::VectorXd nu = ellipsoid_normal(e.axes, foot.y);
                   const double gn = foot.y.cwiseQuotient(e.axes.cwiseProduct(e.axes)).norm();
                   const RealMatrix proj = RealMatrix::Identity(m, m) - nu * nu.transpose();
                   const RealMatrix k =
                       (e.axes.cwiseProduct(e.axes)).cwiseInverse().asDiagonal().toDenseMatrix() / gn;
                   const RealMatrix shape = proj * k * proj;
                   const RealMatrix inv = (RealMatrix::Identity(m, m) - foot.signed_distance * shape).inverse();
                   RealMatrix hess = -proj * shape * inv * proj;
                   hess = 0.5 * (hess + hess.transpose());
                   return DistanceJet{foot.signed_distance, -nu, hess};
                 },
                 [&](const LevelSet& ls) {
                   const double h = 1e-4 * domain.r0;
                   auto sd = [&](const Point& p) { return level_set_foot(ls, p).signed_distance; };
                   return DistanceJet{sd(z), fd_gradient(sd, z, h), fd_hessian(sd, z, h)};
                 }},
      domain.shape);
}

std::vector<BoundaryPoint> boundary_samples(const DomainSpec& domain, int count, unsigned seed) {
  const int m = domain.real_dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<BoundaryPoint> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    Eigen::VectorXd u(m);
    // Include coordinate directions first so the extremal points of axis-aligned shapes are hit.
    if (s < 2 * m) {
      u.setZero();
      u(s / 2) = (s % 2 == 0) ? 1.0 : -1.0;
    } else {
      for (int i = 0; i < m; ++i) u(i) = gauss(rng);
      u.normalize();
    }
    out.push_back(std::visit(
        Overloaded{[&](const Ball& b) { return BoundaryPoint{b.radius * u, u}; },
                   [&](const Ellipsoid& e) {
                     const Point y = u / std::sqrt(u.cwiseQuotient(e.axes).squaredNorm());
                     return BoundaryPoint{y, ellipsoid_normal(e.axes, y)};
                   },
                   [&](const LevelSet& ls) {
                     const Point y = level_set_ray_hit(ls, u) * u;
                     Eigen::VectorXd g = fd_gradient(ls.phi, y, 1e-6 * ls.bounding_radius);
                     return BoundaryPoint{y, g / g.norm()};
                   }},
        domain.shape));
  }
  return out;
}

ScalarJet defining_function(const DomainSpec& domain, const Point& z) {
  const DistanceJet dj = distance_jet(domain, z);
  const double c = domain.C_Omega;
  ScalarJet j;
  j.value = -dj.d + c * dj.d * dj.d;
  const double slope = -1.0 + 2.0 * c * dj.d;
  j.grad = slope * dj.grad;
  j.hess = slope * dj.hess + 2.0 * c * dj.grad * dj.grad.transpose();
  return j;
}

CertificateResult pseudoconvexity_certificate(const DomainSpec& domain, int k, int samples) {
  if (k < 1 || k > domain.n) throw DomainError("pseudoconvexity_certificate: k outside [1, n]");
  const double h = 1e-4 * domain.r0;
  const double c = domain.C_Omega;
  CertificateResult result{true, kInf, std::nullopt};
  for (const auto& bp : boundary_samples(domain, samples)) {
    const RealMatrix hess = fd_hessian_of(domain, bp.y, h, [c](double d) { return -d + c * d * d; });
    const Spectrum lambda = hermitian_eigenvalues(HermitianMatrix(complex_hessian_from_real(hess)));
    const double margin = gamma_k_margin(lambda, k);
    if (margin < result.worst_margin) {
      result.worst_margin = margin;
      if (!(margin > 0.0)) result.violation = bp.y;
    }
  }
  result.certified = result.worst_margin > 0.0;
  if (result.certified) result.violation.reset();
  return result;
}

double min_curvature_radius(const DomainSpec& domain) {
  return std::visit(Overloaded{[](const Ball& b) { return b.radius; },
                               [](const Ellipsoid& e) {
                                 const double amin = e.axes.minCoeff();
                                 return amin * amin / e.axes.maxCoeff();
                               },
                               [&](const LevelSet&) {
                                 double kmax = 0.0;
                                 for (const auto& bp : boundary_samples(domain, domain.boundary_samples)) {
                                   const RealMatrix hess = fd_hessian_of(domain, bp.y, 1e-4 * domain.r0,
                                                                         [](double d) { return d; });
                                   Eigen::SelfAdjointEigenSolver<RealMatrix> es(hess, Eigen::EigenvaluesOnly);
                                   kmax = std::max(kmax, es.eigenvalues().cwiseAbs().maxCoeff());
                                 }
                                 return kmax > 0.0 ? 1.0 / kmax : kInf;
                               }},
                    domain.shape);
}

double collar_subharmonicity(const DomainSpec& domain, const OperatorOrder& order, int boundary_count,
                             int depth_levels) {
  if (order.n != domain.n) throw DomainError("collar_subharmonicity: order.n differs from domain.n");
  const double mu0 = domain.mu0;
  const double dist0 = signed_distance(domain, Point::Zero(domain.real_dim()));
  if (!(dist0 > domain.r0 + 2.0 * mu0))
    throw ConfigurationError("B_r0 ⊂⊂ {d > 2 mu0} violated: dist(0, ∂Ω) - r0 <= 2 mu0");
  if (!(2.0 * mu0 < min_curvature_radius(domain)))
    throw ConfigurationError("collar 2 mu0 exceeds the smallest boundary curvature radius");
  if (boundary_count <= 0) boundary_count = domain.boundary_samples;

  double eps0 = kInf;
  for (const auto& bp : boundary_samples(domain, boundary_count)) {
    for (int j = 0; j < depth_levels; ++j) {
      const double d = 2.0 * mu0 * j / (depth_levels - 1);
      const Point z = bp.y - d * bp.normal;
      const ScalarJet rho = defining_function(domain, z);
      const HermitianMatrix a(rho.complex_hessian());
      const Spectrum lambda = hermitian_eigenvalues(a);
      if (!in_gamma_k(lambda, order.k, true)) {
        std::ostringstream os;
        os << "rho = -d + C_Omega d^2 is not strictly k-subharmonic in the collar (d = " << d
           << "); adjust C_Omega or mu0";
        throw ConfigurationError(os.str());
      }
      eps0 = std::min(eps0, sigma_k_hermitian(a, order.k));
    }
  }
  if (!(eps0 > 0.0)) throw ConfigurationError("collar minimum of H_k[rho] is not positive");
  return eps0;
}

double starshape_constant(const DomainSpec& domain, int samples) {
  double m = kInf;
  for (const auto& bp : boundary_samples(domain, samples)) m = std::min(m, bp.y.dot(bp.normal));
  return m;
}

DomainSpec auto_configure(DomainSpec domain, int k, int samples) {
  auto passes = [&](double c) {
    DomainSpec trial = domain;
    trial.C_Omega = c;
    return pseudoconvexity_certificate(trial, k, samples).certified;
  };
  double c = 1e-3;
  if (!passes(c)) {
    double lo = c, hi = 2.0 * c;
    int guard = 0;
    while (!passes(hi)) {
      lo = hi;
      hi *= 2.0;
      if (++guard > 60) throw ConfigurationError("auto_configure: no C_Omega certifies the domain");
    }
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (lo + hi);
      (passes(mid) ? hi : lo) = mid;
    }
    c = hi;
  }
  domain.C_Omega = c;
  const double dist0 = signed_distance(domain, Point::Zero(domain.real_dim()));
  domain.mu0 = std::min({1.0 / (4.0 * c), (dist0 - domain.r0) / 4.0, min_curvature_radius(domain) / 4.0});
  return domain;
}

bool inside(const DomainSpec& domain, const Point& z) {
  return std::visit(Overloaded{[&](const Ball& b) { return z.squaredNorm() < b.radius * b.radius; },
                               [&](const Ellipsoid& e) { return z.cwiseQuotient(e.axes).squaredNorm() < 1.0; },
                               [&](const LevelSet& ls) { return ls.phi(z) < 0.0; }},
                    domain.shape);
}

double outer_bound(const DomainSpec& domain) {
  return std::visit(Overloaded{[](const Ball& b) { return b.radius; },
                               [](const Ellipsoid& e) { return e.axes.maxCoeff(); },
                               [](const LevelSet& ls) { return ls.bounding_radius; }},
                    domain.shape);
}

namespace {

// Larger root of |p + t q|² = 1 for |p| < 1.
double unit_sphere_exit(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  const double a = q.squaredNorm();
  const double b = p.dot(q);
  const double c = p.squaredNorm() - 1.0;
  const double disc = std::max(0.0, b * b - a * c);
  // c < 0, so the positive root is -c / (b - sqrt) written without cancellation.
  return b >= 0.0 ? -c / (b + std::sqrt(disc)) : (std::sqrt(disc) - b) / a;
}

}  // namespace

double segment_exit(const DomainSpec& domain, const Point& x, const Eigen::VectorXd& w) {
  const double t = std::visit(
      Overloaded{[&](const Ball& b) { return unit_sphere_exit(x / b.radius, w / b.radius); },
                 [&](const Ellipsoid& e) { return unit_sphere_exit(x.cwiseQuotient(e.axes), w.cwiseQuotient(e.axes)); },
                 [&](const LevelSet& ls) {
                   if (ls.phi(x + w) < 0.0) return kInf;
                   double lo = 0.0, hi = 1.0;
                   for (int it = 0; it < 60; ++it) {
                     const double mid = 0.5 * (lo + hi);
                     (ls.phi(x + mid * w) < 0.0 ? lo : hi) = mid;
                   }
                   return 0.5 * (lo + hi);
                 }},
      domain.shape);
  return t > 1.0 ? kInf : t;
}

}  // namespace khess
