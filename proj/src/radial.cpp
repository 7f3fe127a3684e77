#include "khessian/radial.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <memory>
#include <sstream>

#include "khessian/errors.hpp"

namespace khess {

void ApproxConfig::validate(const GlueConstants& constants) const {
  if (!(epsilon > 0.0)) throw ConfigurationError("epsilon must be positive");
  if (epsilon > constants.epsilon1) {
    std::ostringstream os;
    os << "epsilon exceeds epsilon1 (" << epsilon << " > " << constants.epsilon1 << ")";
    throw ConfigurationError(os.str());
  }
  if (!(r > 0.0)) throw ConfigurationError("puncture radius r must be positive");
  if (r > constants.r_max) {
    std::ostringstream os;
    os << "puncture radius exceeds r_max (" << r << " > " << constants.r_max << ")";
    throw ConfigurationError(os.str());
  }
  if (!(newton_tol > 0.0)) throw ConfigurationError("newton_tol must be positive");
  if (max_iter < 1) throw ConfigurationError("max_iter must be >= 1");
}

ApproxConfig approx_config(const DomainSpec& domain, const HessianOrder& order, double epsilon, double r) {
  auto [sub, constants] = make_subsolution(domain, order, r);
  ApproxConfig cfg;
  cfg.epsilon = epsilon;
  cfg.r = r;
  Point z = Point::Zero(domain.real_dim());
  z(0) = r;
  cfg.boundary_inner = sub.value(z);
  cfg.boundary_outer = -1.0;
  cfg.validate(constants);
  return cfg;
}

Spectrum radial_hessian_spectrum(double fp, double fpp, double rho, int n) {
  Eigen::VectorXd lambda = Eigen::VectorXd::Constant(n, fp);
  lambda(n - 1) = fp + rho * fpp;
  return Spectrum(lambda);
}

double scaled_residual(const Spectrum& lambda, int k, double epsilon) {
  const double scale = std::max(1.0, std::pow(lambda.values().cwiseAbs().maxCoeff(), k));
  return (elem_sym(lambda, k) - epsilon) / scale;
}

Eigen::VectorXd log_rho_grid(double r, double outer_radius, int nodes) {
  const double t0 = std::log(r * r);
  const double t1 = std::log(outer_radius * outer_radius);
  Eigen::VectorXd rho(nodes);
  for (int i = 0; i < nodes; ++i) rho(i) = std::exp(t0 + (t1 - t0) * i / (nodes - 1));
  rho(0) = r * r;
  rho(nodes - 1) = outer_radius * outer_radius;
  return rho;
}

namespace {

int hermite_interval(const Eigen::VectorXd& x, double q) {
  const auto* begin = x.data();
  const auto* end = x.data() + x.size();
  auto it = std::upper_bound(begin, end, q);
  int i = static_cast<int>(it - begin) - 1;
  return std::clamp(i, 0, static_cast<int>(x.size()) - 2);
}

}  // namespace

double RadialProfile::value_at(double q) const {
  const int i = hermite_interval(rho, q);
  const double h = rho(i + 1) - rho(i);
  const double s = (q - rho(i)) / h;
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
  return h00 * f(i) + h10 * h * fp(i) + h01 * f(i + 1) + h11 * h * fp(i + 1);
}

double RadialProfile::slope_at(double q) const {
  const int i = hermite_interval(rho, q);
  const double h = rho(i + 1) - rho(i);
  const double s = (q - rho(i)) / h;
  const double d00 = 6 * s * s - 6 * s, d10 = 3 * s * s - 4 * s + 1;
  const double d01 = -6 * s * s + 6 * s, d11 = 3 * s * s - 2 * s;
  return (d00 * f(i) + d01 * f(i + 1)) / h + d10 * fp(i) + d11 * fp(i + 1);
}

// ---- exact first integral --------------------------------------------------------------------------

RadialExactSolution::RadialExactSolution(const ApproxConfig& config, const OperatorOrder& order,
                                         double outer_radius)
    : n_(order.n),
      k_(order.k),
      epsilon_(config.epsilon),
      rho_in_(config.r * config.r),
      rho_out_(outer_radius * outer_radius),
      f_in_(config.boundary_inner),
      beta_(0.0),
      c_(0.0) {
  if (!(config.epsilon >= 0.0)) throw ConfigurationError("radial exact solver needs epsilon >= 0");
  if (!(config.r > 0.0 && config.r < outer_radius)) throw ConfigurationError("need 0 < r < outer radius");
  beta_ = k_ * epsilon_ / (n_ * binomial(n_ - 1, k_ - 1));
  const double gap = config.boundary_outer - config.boundary_inner;

  auto mismatch = [&](double c) {
    c_ = c;
    return integral(rho_in_, rho_out_) - gap;
  };
  // c is bounded below by f' >= 0 on [ρ_in, ρ_out]: β + cρ_in^{-n} >= 0.
  const double c_min = -beta_ * std::pow(rho_in_, n_);
  const double j_power = [&] {
    const double q = 1.0 - static_cast<double>(n_) / k_;
    if (q == 0.0) return std::log(rho_out_ / rho_in_);
    return (std::pow(rho_out_, q) - std::pow(rho_in_, q)) / q;
  }();
  double lo, hi;
  const double m0 = mismatch(0.0);
  if (m0 == 0.0) {
    c_ = 0.0;
    return;
  }
  if (m0 < 0.0) {
    lo = 0.0;
    hi = std::pow(gap / j_power, k_);
    for (int guard = 0; !(mismatch(hi) >= 0.0); ++guard) {
      if (guard > 200) throw ConfigurationError("radial exact solver: cannot bracket the integration constant");
      lo = hi;
      hi *= 2.0;
    }
  } else {
    lo = c_min;
    hi = 0.0;
    if (!(mismatch(lo) <= 0.0))
      throw ConfigurationError(
          "infeasible radial data: boundary gap too small for a k-subharmonic solution of H_k = epsilon");
  }
  std::uintmax_t max_iter = 200;
  boost::math::tools::eps_tolerance<double> tol(50);
  const auto bracket = boost::math::tools::toms748_solve(mismatch, lo, hi, tol, max_iter);
  c_ = 0.5 * (bracket.first + bracket.second);
}

double RadialExactSolution::d1(double rho) const {
  return std::pow(std::max(0.0, beta_ + c_ * std::pow(rho, -n_)), 1.0 / k_);
}

double RadialExactSolution::d2(double rho) const {
  const double fp = d1(rho);
  if (c_ == 0.0) return 0.0;
  return -n_ * c_ * std::pow(rho, -n_ - 1) / (k_ * std::pow(fp, k_ - 1));
}

double RadialExactSolution::integral(double rho_a, double rho_b) const {
  if (rho_a == rho_b) return 0.0;
  // Substitute ρ = e^t to tame the ρ^{-n} growth near the puncture.
  auto integrand = [this](double t) {
    const double rho = std::exp(t);
    return rho * std::pow(std::max(0.0, beta_ + c_ * std::exp(-n_ * t)), 1.0 / k_);
  };
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, std::log(rho_a), std::log(rho_b),
                                                                        10, 1e-13, &err);
}

double RadialExactSolution::value(double rho) const { return f_in_ + integral(rho_in_, rho); }

RadialProfile RadialExactSolution::sample_at(const Eigen::VectorXd& rho) const {
  RadialProfile p;
  p.n = n_;
  p.k = k_;
  p.epsilon = epsilon_;
  p.rho = rho;
  const int m = static_cast<int>(rho.size());
  p.f.resize(m);
  p.fp.resize(m);
  p.fpp.resize(m);
  p.residual.resize(m);
  double acc = value(rho(0));
  for (int i = 0; i < m; ++i) {
    if (i > 0) acc += integral(rho(i - 1), rho(i));
    p.f(i) = acc;
    p.fp(i) = d1(rho(i));
    p.fpp(i) = d2(rho(i));
    p.residual(i) = scaled_residual(radial_hessian_spectrum(p.fp(i), p.fpp(i), rho(i), n_), k_, epsilon_);
  }
  return p;
}

RadialProfile RadialExactSolution::sample(int nodes) const {
  return sample_at(log_rho_grid(std::sqrt(rho_in_), std::sqrt(rho_out_), nodes));
}

RadialExactSolution solve_radial_exact(const ApproxConfig& config, const OperatorOrder& order,
                                       const DomainSpec& domain) {
  const auto* ball = std::get_if<Ball>(&domain.shape);
  if (!ball) throw ConfigurationError("radial solver requires a ball domain");
  return RadialExactSolution(config, order, ball->radius);
}

// ---- finite differences in t = log ρ ------------------------------------------------------------------

namespace {

struct NodalState {
  Eigen::VectorXd a, b, scale, residual;  // interior entries
  bool in_cone = true;
  double sup = 0.0;
};

NodalState evaluate(const Eigen::VectorXd& f, const Eigen::VectorXd& rho, double dt, const OperatorOrder& order,
                    double epsilon, const Eigen::VectorXd* frozen_scale = nullptr) {
  const int m = static_cast<int>(f.size());
  NodalState s;
  s.a.resize(m);
  s.b.resize(m);
  s.scale.resize(m);
  s.residual = Eigen::VectorXd::Zero(m);
  for (int i = 1; i < m - 1; ++i) {
    s.a(i) = (f(i + 1) - f(i - 1)) / (2.0 * dt * rho(i));
    s.b(i) = (f(i + 1) - 2.0 * f(i) + f(i - 1)) / (dt * dt * rho(i));
    Eigen::VectorXd lv = Eigen::VectorXd::Constant(order.n, s.a(i));
    lv(order.n - 1) = s.b(i);
    const Spectrum lambda(lv);
    if (!in_gamma_k(lambda, order.k, true)) s.in_cone = false;
    s.scale(i) = frozen_scale ? (*frozen_scale)(i) : std::max(1.0, std::pow(lv.cwiseAbs().maxCoeff(), order.k));
    s.residual(i) = (elem_sym(lambda, order.k) - epsilon) / s.scale(i);
    s.sup = std::max(s.sup, std::abs(s.residual(i)));
  }
  return s;
}

// Thomas algorithm; sub(i) couples to i-1, sup(i) to i+1.
Eigen::VectorXd solve_tridiagonal(Eigen::VectorXd sub, Eigen::VectorXd diag, Eigen::VectorXd sup, Eigen::VectorXd rhs) {
  const int m = static_cast<int>(diag.size());
  for (int i = 1; i < m; ++i) {
    const double w = sub(i) / diag(i - 1);
    diag(i) -= w * sup(i - 1);
    rhs(i) -= w * rhs(i - 1);
  }
  Eigen::VectorXd x(m);
  x(m - 1) = rhs(m - 1) / diag(m - 1);
  for (int i = m - 2; i >= 0; --i) x(i) = (rhs(i) - sup(i) * x(i + 1)) / diag(i);
  return x;
}

}  // namespace

RadialProfile solve_radial_fd(const ApproxConfig& config, const OperatorOrder& order, const DomainSpec& domain,
                              int nodes, const std::function<double(double rho)>& initial) {
  const auto* ball = std::get_if<Ball>(&domain.shape);
  if (!ball) throw ConfigurationError("radial solver requires a ball domain");
  if (nodes < 32) throw ConfigurationError("radial FD solver needs at least 32 nodes");
  const Eigen::VectorXd rho = log_rho_grid(config.r, ball->radius, nodes);
  const double dt = (std::log(rho(nodes - 1)) - std::log(rho(0))) / (nodes - 1);
  const int n = order.n, k = order.k;
  const double eps = config.epsilon;

  Eigen::VectorXd f(nodes);
  for (int i = 0; i < nodes; ++i) f(i) = initial(rho(i));
  f(0) = config.boundary_inner;
  f(nodes - 1) = config.boundary_outer;

  NodalState state = evaluate(f, rho, dt, order, eps);
  std::ostringstream history;
  history << "iter residual_sup step\n";
  history << 0 << ' ' << state.sup << " -\n";
  if (!state.in_cone)
    throw NonconvergenceError("initial iterate is not strictly k-subharmonic on the grid", history.str());

  // Second differences cannot resolve the residual below the rounding floor of f/(dt²ρ).
  auto rounding_floor = [&](const NodalState& st) {
    double fl = 0.0;
    const double fmax = f.cwiseAbs().maxCoeff();
    for (int i = 1; i < nodes - 1; ++i)
      fl = std::max(fl, 4.0 * std::numeric_limits<double>::epsilon() * fmax / (dt * dt * rho(i) * st.scale(i)));
    return fl;
  };
  double tol = std::max(config.newton_tol, rounding_floor(state));
  int iter = 0;
  while (state.sup > tol) {
    if (iter >= config.max_iter)
      throw NonconvergenceError("radial Newton exceeded max_iter", history.str());
    ++iter;
    // Jacobian of the scaled residual; Dirichlet rows are identity with zero right-hand side.
    Eigen::VectorXd sub = Eigen::VectorXd::Zero(nodes), diag = Eigen::VectorXd::Ones(nodes),
                    sup = Eigen::VectorXd::Zero(nodes), rhs = Eigen::VectorXd::Zero(nodes);
    for (int i = 1; i < nodes - 1; ++i) {
      Eigen::VectorXd lv = Eigen::VectorXd::Constant(n, state.a(i));
      lv(n - 1) = state.b(i);
      const Spectrum lambda(lv);
      const double dSda = n > 1 ? (n - 1) * elem_sym_reduced(lambda, k - 1, 0) : 0.0;
      const double dSdb = elem_sym_reduced(lambda, k - 1, n - 1);
      const double ca = 1.0 / (2.0 * dt * rho(i));
      const double cb = 1.0 / (dt * dt * rho(i));
      const double s = state.scale(i);
      sub(i) = (-dSda * ca + dSdb * cb) / s;
      diag(i) = (-2.0 * dSdb * cb) / s;
      sup(i) = (dSda * ca + dSdb * cb) / s;
      rhs(i) = -state.residual(i);
    }
    const Eigen::VectorXd step = solve_tridiagonal(sub, diag, sup, rhs);

    double alpha = 1.0;
    bool accepted = false;
    int cone_exits = 0;
    while (alpha > 1e-10) {
      const Eigen::VectorXd trial = f + alpha * step;
      // Row scales stay frozen within one line search so the Newton direction is a descent direction.
      NodalState ts = evaluate(trial, rho, dt, order, eps, &state.scale);
      if (!ts.in_cone) {
        ++cone_exits;
        alpha *= 0.5;
        continue;
      }
      if (ts.sup <= (1.0 - 1e-4 * alpha) * state.sup || ts.sup <= tol) {
        f = trial;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    history << iter << ' ' << state.sup << ' ' << alpha << " cone_exits=" << cone_exits << '\n';
    if (!accepted) throw NonconvergenceError("radial Newton line search failed (cone exit or stagnation)", history.str());
    state = evaluate(f, rho, dt, order, eps);
    tol = std::max(config.newton_tol, rounding_floor(state));
  }

  RadialProfile p;
  p.n = n;
  p.k = k;
  p.epsilon = eps;
  p.rho = rho;
  p.f = f;
  p.fp.resize(nodes);
  p.fpp.resize(nodes);
  p.residual = state.residual;
  p.newton_iterations = iter;
  for (int i = 1; i < nodes - 1; ++i) {
    p.fp(i) = state.a(i);
    p.fpp(i) = (state.b(i) - state.a(i)) / rho(i);
  }
  // One-sided second-order stencils at the two Dirichlet ends.
  const int e = nodes - 1;
  const double ft0 = (-3 * f(0) + 4 * f(1) - f(2)) / (2 * dt);
  const double ftt0 = (2 * f(0) - 5 * f(1) + 4 * f(2) - f(3)) / (dt * dt);
  const double fte = (3 * f(e) - 4 * f(e - 1) + f(e - 2)) / (2 * dt);
  const double ftte = (2 * f(e) - 5 * f(e - 1) + 4 * f(e - 2) - f(e - 3)) / (dt * dt);
  p.fp(0) = ft0 / rho(0);
  p.fpp(0) = (ftt0 - ft0) / (rho(0) * rho(0));
  p.fp(e) = fte / rho(e);
  p.fpp(e) = (ftte - fte) / (rho(e) * rho(e));
  p.residual(0) = f(0) - config.boundary_inner;
  p.residual(e) = f(e) - config.boundary_outer;
  return p;
}

RadialProfile solve_radial_fd(const ApproxConfig& config, const HessianOrder& order, const DomainSpec& domain,
                              int nodes) {
  const auto* ball = std::get_if<Ball>(&domain.shape);
  if (!ball) throw ConfigurationError("radial solver requires a ball domain");
  // Starting from u̲ stalls against the cone guard near a small inner sphere once the mesh is fine,
  // so the Newton iteration starts at the interpolated ODE solution and only removes the truncation error.
  try {
    auto exact = std::make_shared<RadialExactSolution>(config, order, ball->radius);
    return solve_radial_fd(config, static_cast<const OperatorOrder&>(order), domain, nodes,
                           [exact](double rho) { return exact->value(rho); });
  } catch (const ConfigurationError&) {
  }
  auto [sub, constants] = make_subsolution(domain, order, config.r);
  const int m = domain.real_dim();
  auto initial = [sub = std::move(sub), m](double rho) {
    Point z = Point::Zero(m);
    z(0) = std::sqrt(rho);
    return sub.value(z);
  };
  return solve_radial_fd(config, static_cast<const OperatorOrder&>(order), domain, nodes, initial);
}

Eigen::VectorXd radial_fd_residual(const RadialProfile& p, double epsilon) {
  const int m = p.size();
  if (m < 3) throw ValidationError("profile too short for a residual");
  const double dt = (std::log(p.rho(m - 1)) - std::log(p.rho(0))) / (m - 1);
  for (int i = 1; i < m; ++i)
    if (std::abs(std::log(p.rho(i)) - std::log(p.rho(i - 1)) - dt) > 1e-9 * std::max(1.0, dt) + 1e-12)
      throw ValidationError("profile grid is not log-uniform");
  return evaluate(p.f, p.rho, dt, OperatorOrder(p.n, p.k), epsilon).residual;
}

void write_profile_csv(const RadialProfile& p, std::ostream& out) {
  out << "rho,|z|,f,fp,fpp,residual\n";
  char buf[200];
  for (int i = 0; i < p.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.rho(i), std::sqrt(p.rho(i)), p.f(i),
                  p.fp(i), p.fpp(i), p.residual(i));
    out << buf;
  }
}

RadialProfile read_profile_csv(std::istream& in, int n, int k) {
  std::vector<std::array<double, 6>> rows;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line.rfind("rho,", 0) != 0) throw ValidationError("profile CSV: missing header rho,|z|,f,fp,fpp,residual");
      header = true;
      continue;
    }
    std::array<double, 6> row{};
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; c < 6; ++c) {
      if (!std::getline(ss, cell, ',')) throw ValidationError("profile CSV: short row '" + line + "'");
      try {
        row[c] = std::stod(cell);
      } catch (const std::exception&) {
        throw ValidationError("profile CSV: bad number '" + cell + "'");
      }
    }
    rows.push_back(row);
  }
  if (rows.size() < 4) throw ValidationError("profile CSV: too few rows");
  RadialProfile p;
  p.n = n;
  p.k = k;
  const int m = static_cast<int>(rows.size());
  p.rho.resize(m);
  p.f.resize(m);
  p.fp.resize(m);
  p.fpp.resize(m);
  p.residual.resize(m);
  for (int i = 0; i < m; ++i) {
    p.rho(i) = rows[i][0];
    p.f(i) = rows[i][2];
    p.fp(i) = rows[i][3];
    p.fpp(i) = rows[i][4];
    p.residual(i) = rows[i][5];
    if (!(p.rho(i) > 0.0) || (i > 0 && !(p.rho(i) > p.rho(i - 1))))
      throw ValidationError("profile CSV: rho must be positive and increasing");
  }
  return p;
}

RadialProfile sample_barrier(const BarrierFunction& barrier, const OperatorOrder& order, const Eigen::VectorXd& rho) {
  RadialProfile p;
  p.n = order.n;
  p.k = order.k;
  p.rho = rho;
  const int m = static_cast<int>(rho.size());
  p.f.resize(m);
  p.fp.resize(m);
  p.fpp.resize(m);
  p.residual = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) {
    Point z = Point::Zero(2 * order.n);
    const double s = std::sqrt(rho(i));
    z(0) = s;
    const ScalarJet j = barrier(z);
    p.f(i) = j.value;
    p.fp(i) = j.grad(0) / (2.0 * s);
    p.fpp(i) = (j.hess(0, 0) - 2.0 * p.fp(i)) / (4.0 * rho(i));
  }
  return p;
}

}  // namespace khess
