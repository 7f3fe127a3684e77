// Acceptance driver: one PASS/FAIL line per criterion. `acceptance 4 7` runs a subset.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "../unit/oracles.hpp"
#include "khessian/barriers.hpp"
#include "khessian/errors.hpp"
#include "khessian/grid.hpp"
#include "khessian/radial.hpp"
#include "khessian/symm.hpp"
#include "khessian/verify.hpp"

using namespace khess;

namespace {

double now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

DomainSpec spec_ball(int n) {
  DomainSpec d;
  d.shape = Ball{1.0};
  d.n = n;
  d.r0 = 0.5;
  d.R0 = 2.0;
  d.tau0 = 0.1;
  d.C_Omega = 1.0;
  d.mu0 = 0.1;
  return d;
}

DomainSpec spec_ellipsoid(int n) {
  DomainSpec d = spec_ball(n);
  Eigen::VectorXd axes = Eigen::VectorXd::Ones(2 * n);
  axes(1) = 1.2;
  axes(n + 1) = 1.2;
  d.shape = Ellipsoid{axes};
  return d;
}

double log_step(const RadialProfile& p) { return std::log(p.rho(1) / p.rho(0)); }

double sup_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Test-side closed form for H_k[f(|z|²)] = ε on r² < ρ < R²: ρ f' = ρ(β + cρ^{-n})^{1/k} integrated
// in t = log ρ by composite Simpson, c found by bisection on the Dirichlet gap.
struct RadialOracle {
  int n, k;
  double beta, c, t0, t1, f0;

  RadialOracle(int n_, int k_, double eps, double r, double R, double f_in, double f_out)
      : n(n_), k(k_), t0(2 * std::log(r)), t1(2 * std::log(R)), f0(f_in) {
    beta = k * eps / (n * binomial(n - 1, k - 1));
    double lo = -beta * std::exp(n * t0), hi = 1.0;
    c = lo;
    while (value_c(hi, std::exp(t1)) < f_out) hi *= 2;
    for (int it = 0; it < 200; ++it) {
      c = 0.5 * (lo + hi);
      (value_c(c, std::exp(t1)) < f_out ? lo : hi) = c;
    }
    c = 0.5 * (lo + hi);
  }
  double slope(double cc, double rho) const { return std::pow(std::max(0.0, beta + cc * std::pow(rho, -n)), 1.0 / k); }
  double value_c(double cc, double rho) const {
    const double t = std::log(rho);
    const int m = 4000;
    const double dt = (t - t0) / m;
    double s = 0;
    for (int i = 0; i <= m; ++i) {
      const double ti = t0 + i * dt, e = std::exp(ti);
      const double w = (i == 0 || i == m) ? 1 : (i % 2 ? 4 : 2);
      s += w * e * slope(cc, e);
    }
    return f0 + s * dt / 3;
  }
  double value(double rho) const { return value_c(c, rho); }
};

// ---- 1 ---------------------------------------------------------------------------------------------
bool ac1() {
  std::mt19937_64 rng(101);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int samples = 2000;
  double id1 = 0, id2 = 0, mac_min = 1e300, mac_diff = 0, conc_min = 1e300, minor_err = 0;
  for (int s = 0; s < samples; ++s) {
    const int n = 2 + s % 5;
    const int k = 1 + static_cast<int>(rng() % n);
    Eigen::VectorXd l(n);
    for (int i = 0; i < n; ++i) l(i) = g(rng);
    const Spectrum lam(l);
    const double scale = std::max(1.0, std::pow(l.cwiseAbs().maxCoeff(), k));
    // S_k(λ|i) needs k <= n-1; (2.1) at k = n reads S_n = λ_i S_{n-1}(λ|i)
    for (int i = 0; i < n; ++i) {
      const double reduced = k < n ? elem_sym_reduced(lam, k, i) : 0.0;
      id1 = std::max(id1, std::abs(elem_sym(lam, k) - reduced - l(i) * oracle::elem_sym_brute(oracle::drop(l, i), k - 1)) /
                              scale);
    }
    if (k < n) {
      double sum = 0;
      for (int i = 0; i < n; ++i) sum += elem_sym_reduced(lam, k, i);
      id2 = std::max(id2, std::abs(sum - (n - k) * oracle::elem_sym_brute(l, k)) / scale);
    }

    const int kc = 1 + static_cast<int>(rng() % n);
    const Eigen::VectorXd a = oracle::sample_cone(rng, n, kc), b = oracle::sample_cone(rng, n, kc);
    for (int lo = 1; lo < kc; ++lo) {
      const double gap = maclaurin_gap(Spectrum(a), kc, lo);
      const double ref = std::pow(oracle::elem_sym_brute(a, lo) / binomial(n, lo), 1.0 / lo) -
                         std::pow(oracle::elem_sym_brute(a, kc) / binomial(n, kc), 1.0 / kc);
      mac_min = std::min(mac_min, gap);
      mac_diff = std::max(mac_diff, std::abs(gap - ref));
    }
    conc_min = std::min(conc_min, concavity_probe(Spectrum(a), Spectrum(b), kc, unif(rng)));

    const Eigen::MatrixXcd h = oracle::random_hermitian(rng, n);
    const double ref = oracle::sigma_k_eig(h, k);
    minor_err = std::max(minor_err, std::abs(sigma_k_hermitian(h, k) - ref) / std::max(1.0, std::abs(ref)));
  }
  std::printf("  samples=%d identity(2.1)=%.2e identity(2.2)=%.2e maclaurin_min=%.3e (vs oracle %.1e) "
              "concavity_min=%.3e minors_vs_eig=%.2e\n",
              samples, id1, id2, mac_min, mac_diff, conc_min, minor_err);
  return id1 <= 1e-12 && id2 <= 1e-12 && mac_min >= 0.0 && mac_diff <= 1e-12 && conc_min >= -1e-12 &&
         minor_err <= 1e-10;
}

// ---- 2 ---------------------------------------------------------------------------------------------
bool ac2() {
  const int cases[4][2] = {{2, 1}, {3, 1}, {3, 2}, {4, 3}};
  std::mt19937_64 rng(102);
  bool ok = true;
  for (const auto& c : cases) {
    const int n = c[0], k = c[1];
    const HessianOrder order(n, k);
    const double q = static_cast<double>(n) / k;
    double worst = 0, spec_err = 0, jet_err = 0;
    for (int i = 0; i <= 200; ++i) {
      const double rho = std::exp(std::log(0.05) + i * (std::log(4.0) - std::log(0.05)) / 200);
      // f = -ρ^{1-q}: f' = (q-1)ρ^{-q}, f'' = -q(q-1)ρ^{-q-1}
      const double fp = (q - 1) * std::pow(rho, -q), fpp = -q * (q - 1) * std::pow(rho, -q - 1);
      Eigen::VectorXd ref = Eigen::VectorXd::Constant(n, fp);
      ref(n - 1) = fp + rho * fpp;
      const Spectrum lam = fundamental_spectrum(rho, order);
      Eigen::VectorXd got = lam.values();
      std::sort(got.data(), got.data() + n);
      std::sort(ref.data(), ref.data() + n);
      const double scale = std::max(1.0, std::pow(ref.cwiseAbs().maxCoeff(), k));
      spec_err = std::max(spec_err, sup_diff(got, ref) / std::max(1.0, ref.cwiseAbs().maxCoeff()));
      worst = std::max({worst, std::abs(elem_sym(lam, k)) / scale, std::abs(oracle::elem_sym_brute(ref, k)) / scale});
    }
    for (int i = 0; i < 20; ++i) {
      const Point z = (0.3 + 0.7 * i / 19.0) * oracle::sphere_point(rng, 2 * n);
      const ScalarJet jet = fundamental_solution(z, order);
      const double scale = std::max(1.0, std::pow(jet.hess.cwiseAbs().maxCoeff(), k));
      jet_err = std::max(jet_err, std::abs(oracle::sigma_k_eig(jet.complex_hessian(), k)) / scale);
    }
    std::printf("  (n,k)=(%d,%d) max|H_k|/scale=%.2e spectrum_vs_oracle=%.2e jet_H_k=%.2e\n", n, k, worst, spec_err,
                jet_err);
    ok = ok && worst <= 1e-11 && spec_err <= 1e-12 && jet_err <= 1e-11;
  }
  return ok;
}

// ---- 3 ---------------------------------------------------------------------------------------------
bool ac3_case(const char* name, const DomainSpec& d, int k) {
  const HessianOrder order(d.n, k);
  const double r_max = admissible_radius(d, order);
  const double r = 0.5 * r_max;
  const auto [sub, constants] = make_subsolution(d, order, r);
  std::mt19937_64 rng(103 + 10 * d.n + k);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int m = 2 * d.n;
  const double outer = outer_bound(d);

  double min_ratio = 1e300, fd_err = 0, max_bdry = -1e300;
  int count = 0;
  while (count < 10000) {
    // half uniform in volume, half uniform in |z| (dense near the pole)
    const Eigen::VectorXd dir = oracle::sphere_point(rng, m);
    const double t = count % 2 ? r + (outer - r) * unif(rng) : outer * std::pow(unif(rng), 1.0 / m);
    const Point z = t * dir;
    if (t <= r || !inside(d, z)) continue;
    const ComplexMatrix hess = sub(z).complex_hessian();
    const double hk = oracle::sigma_k_eig(hess, k);
    min_ratio = std::min(min_ratio, hk / constants.epsilon1);
    if (count % 100 == 0) {
      // 4th-order FD of the value alone, stencil kept inside Ω_r. The glue band next to ∂Ω is thinner
      // than 1e-3 there, so the best of four steps counts. Relative to the cancelling products.
      const auto f = [&](const Eigen::VectorXd& x) { return sub.value(x); };
      const double scale = std::max(1.0, std::pow(hess.cwiseAbs().maxCoeff(), k));
      double best = 1e300;
      for (const double rel : {1e-3, 1e-4, 1e-5, 3e-6}) {
        const double h = std::min({rel * t, signed_distance(d, z) / 3, (t - r) / 3});
        const double fd = oracle::sigma_k_eig(oracle::complex_hessian(oracle::fd_hessian(f, z, h)), k);
        best = std::min(best, std::abs(fd - hk) / scale);
      }
      fd_err = std::max(fd_err, best);
    }
    ++count;
  }
  for (const auto& b : boundary_samples(d, 5000, 9)) max_bdry = std::max(max_bdry, sub.value(b.y));
  for (int i = 0; i < 5000; ++i) max_bdry = std::max(max_bdry, sub.value(Point(r * oracle::sphere_point(rng, m))));
  std::printf("  %s n=%d k=%d eps1=%.6g r=%.4g: min H_k/eps1=%.9f fd_rel=%.1e max u_sub on dOmega_r=%.6f\n", name, d.n,
              k, constants.epsilon1, r, min_ratio, fd_err, max_bdry);
  return min_ratio >= 1.0 - 1e-6 && max_bdry <= -1.0 + 1e-12 && fd_err <= 1e-4;
}

bool ac3() {
  bool ok = true;
  ok &= ac3_case("ball", spec_ball(2), 1);
  ok &= ac3_case("ellipsoid", spec_ellipsoid(2), 1);
  for (int k = 1; k <= 2; ++k) {
    ok &= ac3_case("ball", spec_ball(3), k);
    ok &= ac3_case("ellipsoid", spec_ellipsoid(3), k);
  }
  return ok;
}

// ---- 4 ---------------------------------------------------------------------------------------------
bool ac4() {
  bool ok = true;
  for (const auto& nk : {std::pair{2, 1}, std::pair{3, 2}}) {
    const DomainSpec d = spec_ball(nk.first);
    const HessianOrder order(nk.first, nk.second);
    const GlueConstants c = glue_constants_without_radius(d, order);
    const double r = admissible_radius(d, order);
    const ApproxConfig cfg = approx_config(d, order, 0.25 * c.epsilon1, r);
    const RadialExactSolution exact = solve_radial_exact(cfg, order, d);
    const RadialOracle oracle(order.n, order.k, cfg.epsilon, r, 1.0, cfg.boundary_inner, cfg.boundary_outer);

    double oracle_gap = 0;
    for (int i = 0; i <= 20; ++i) {
      const double rho = r * r + (1 - r * r) * i / 20.0;
      oracle_gap = std::max(oracle_gap, std::abs(exact.value(rho) - oracle.value(rho)));
    }
    double err[2], step[2];
    const int nodes[2] = {128, 256};
    for (int j = 0; j < 2; ++j) {
      const RadialProfile p = solve_radial_fd(cfg, order, d, nodes[j]);
      err[j] = sup_diff(p.f, exact.sample_at(p.rho).f);
      step[j] = log_step(p);
    }
    const double rate = std::log(err[0] / err[1]) / std::log(step[0] / step[1]);
    std::printf("  (n,k)=(%d,%d) r=%.3g eps=%.6g: closed form vs test oracle %.1e; err(128)=%.3e err(256)=%.3e "
                "order=%.3f\n",
                order.n, order.k, r, cfg.epsilon, oracle_gap, err[0], err[1], rate);
    ok = ok && oracle_gap <= 1e-8 && err[1] <= 1e-5 && rate >= 1.8 && rate <= 2.2;
  }
  return ok;
}

// ---- 5 ---------------------------------------------------------------------------------------------
bool ac5() {
  // k = n: explicit radial data v = A + B log ρ + cρ with H_2[v] = c(B + c)
  const DomainSpec d = spec_ball(2);
  const OperatorOrder order(2, 2);
  const double r = 0.4, cc = 1.0, A = -1 - cc, lr = std::log(r * r);
  const double inner = lr - 1, B = (inner - A - cc * r * r) / lr, eps_ref = cc * (B + cc);
  GridProblem p;
  p.order = order;
  p.domain = d;
  p.r = r;
  const auto v = [=](const Point& z) { return A + B * std::log(z.squaredNorm()) + cc * z.squaredNorm(); };
  p.inner_data = v;
  p.initial = v;
  p.epsilon_start = eps_ref;
  p.epsilon = eps_ref / 4;

  ApproxConfig cfg;
  cfg.epsilon = p.epsilon;
  cfg.r = r;
  cfg.boundary_inner = inner;
  cfg.boundary_outer = -1.0;
  const RadialExactSolution exact(cfg, order, 1.0);
  const RadialOracle oracle(2, 2, cfg.epsilon, r, 1.0, inner, -1.0);
  double oracle_gap = 0;
  for (int i = 0; i <= 20; ++i) {
    const double rho = r * r + (1 - r * r) * i / 20.0;
    oracle_gap = std::max(oracle_gap, std::abs(exact.value(rho) - oracle.value(rho)));
  }

  const double hs[3] = {0.1, 0.1 / std::sqrt(2.0), 0.05};
  double err[3];
  for (int j = 0; j < 3; ++j) {
    const double t = now();
    const GridSolution s = solve_grid(p, hs[j]);
    const GridField& f = s.field;
    err[j] = 0;
    for (int id = 0; id < f.unknown_count(); ++id) {
      const int node = f.node_of_unknown(id);
      err[j] = std::max(err[j], std::abs(f.values()[node] - exact.value(f.position(node).squaredNorm())));
    }
    std::printf("  h=%.4f unknowns=%d stages=%d newton=%d err=%.3e (%.0f s)\n", hs[j], f.unknown_count(),
                s.stats.stages, s.stats.newton_iterations, err[j], now() - t);
  }
  const double rate1 = std::log(err[0] / err[1]) / std::log(hs[0] / hs[1]);
  const double rate2 = std::log(err[1] / err[2]) / std::log(hs[1] / hs[2]);
  std::printf("  eps=%.6g closed form vs test oracle %.1e rates %.3f %.3f\n", p.epsilon, oracle_gap, rate1, rate2);
  return oracle_gap <= 1e-8 && rate1 >= 1.7 && rate1 <= 2.2 && rate2 >= 1.7 && rate2 <= 2.2;
}

// ---- 6 ---------------------------------------------------------------------------------------------
double spread(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return (*hi - *lo) / std::max(std::abs(*hi), std::abs(*lo));
}

bool ac6() {
  const DomainSpec d = spec_ball(2);
  const HessianOrder order(2, 1);
  const GlueConstants c = glue_constants_without_radius(d, order);
  const double eps = 0.25 * c.epsilon1;
  bool ok = true;
  std::vector<double> grad_C, hess_C, c0;
  for (const int nodes : {256, 512}) {
    std::vector<double> c0_r;
    for (const double r : {0.2, 0.1, 0.05}) {
      const double t = now();
      const ApproxConfig cfg = approx_config(d, order, eps, r);
      const RadialProfile p = solve_radial_fd(cfg, order, d, nodes);
      const double mesh = log_step(p);
      const EstimateReport rep = estimate_report(samples_from_profile(p, mesh), d, order, eps, r);
      const double sandwich_tol = 0.25 * mesh * mesh;
      const double P_tol = 1e-8 + 5 * mesh * mesh;
      std::printf("  nodes=%d r=%.2f sandwich=%.2e (tol %.1e) P=%.9f (tol %.1e) grad_C=%.5f hess_C=%.5f c0=%.5f G_min=%.4e "
                  "(%.2f s)\n",
                  nodes, r, rep.sandwich_slack, sandwich_tol, rep.P_interior_over_boundary, P_tol, rep.grad_decay_C,
                  rep.hessian_decay_C, rep.grad_lower_c0, rep.G_min, now() - t);
      ok = ok && rep.sandwich_slack <= sandwich_tol && rep.P_interior_over_boundary <= 1 + P_tol &&
           rep.grad_lower_c0 > 0 && rep.G_min > 0;
      grad_C.push_back(rep.grad_decay_C);
      hess_C.push_back(rep.hessian_decay_C);
      c0.push_back(rep.grad_lower_c0);
    }
  }
  std::printf("  spreads: grad_C %.3f hess_C %.3f c0 %.3f (limit 0.15)\n", spread(grad_C), spread(hess_C), spread(c0));
  return ok && spread(grad_C) <= 0.15 && spread(hess_C) <= 0.15 && spread(c0) <= 0.15;
}

// ---- 7 ---------------------------------------------------------------------------------------------
bool ac7() {
  DomainSpec d = spec_ball(2);
  d.r0 = 0.8;
  d.R0 = 1.0015;
  d.tau0 = 0.001;
  d.mu0 = 0.05;
  const HessianOrder order(2, 1);
  const GlueConstants c = glue_constants_without_radius(d, order);
  const double r_max = admissible_radius(d, order);
  std::vector<RadialProfile> solves;
  for (int j = 0; j < 4; ++j) {
    const double eps = c.epsilon1 * std::ldexp(1.0, -j), r = r_max * std::ldexp(1.0, -j);
    solves.push_back(solve_radial_fd(approx_config(d, order, eps, r), order, d, 512));
  }
  const CauchyGaps gaps = cauchy_convergence_study(solves, order, d.r0, 1.0);
  // ε = 0, r → 0 limit on the unit ball: -|z|^{-2} + 1 - 1
  double limit = 0;
  for (int i = 0; i <= 400; ++i) {
    const double rho = d.r0 * d.r0 + (1 - d.r0 * d.r0) * i / 400.0;
    limit = std::max(limit, std::abs(solves.back().value_at(rho) - (-1.0 / rho)));
  }
  std::printf("  eps1=%.6g r_max=%.4g C0 gaps:", c.epsilon1, r_max);
  for (double g : gaps.c0) std::printf(" %.3e", g);
  std::printf(" C1 gaps:");
  for (double g : gaps.c1) std::printf(" %.3e", g);
  std::printf("\n  final gap to limit: C0 %.3e (test oracle %.3e) C1 %.3e\n", gaps.limit_c0, limit, gaps.limit_c1);
  return gaps.strictly_decreasing() && limit <= 1e-4 && gaps.limit_c0 <= 1e-4;
}

// ---- 8 ---------------------------------------------------------------------------------------------
bool ac8() {
  bool ok = true;
  for (const auto& nk : {std::pair{2, 1}, std::pair{3, 2}}) {
    const DomainSpec d = spec_ball(nk.first);
    const HessianOrder order(nk.first, nk.second);
    const GlueConstants c = glue_constants_without_radius(d, order);
    const double r = 0.2;
    const int nodes = 256;
    const ApproxConfig hi = approx_config(d, order, 0.5 * c.epsilon1, r);
    const ApproxConfig lo = approx_config(d, order, 0.25 * c.epsilon1, r);
    const RadialProfile u_hi = solve_radial_fd(hi, order, d, nodes);
    const RadialProfile u_lo = solve_radial_fd(lo, order, d, nodes);
    const double h2 = std::pow(log_step(u_hi), 2);
    // H_k[u_hi] >= H_k[u_lo] with equal boundary data, so u_hi <= u_lo
    const double violation = (u_hi.f - u_lo.f).maxCoeff();
    const double cmp_tol = 10 * hi.newton_tol + h2;

    const auto [sub, constants] = make_subsolution(d, order, r);
    const RadialProfile from_sub = solve_radial_fd(lo, order, d, nodes, [&, &sub = sub](double rho) {
      Point z = Point::Zero(2 * order.n);
      z(0) = std::sqrt(rho);
      return sub.value(z);
    });
    const double diff = sup_diff(u_lo.f, from_sub.f);
    const double uniq_tol = 2 * lo.newton_tol + h2;
    std::printf("  (n,k)=(%d,%d) r=%.2f: max(u(eps1/2) - u(eps1/4))=%.3e (tol %.1e); default vs u_sub start "
                "%.3e (tol %.1e, iterations %d/%d)\n",
                order.n, order.k, r, violation, cmp_tol, diff, uniq_tol, u_lo.newton_iterations,
                from_sub.newton_iterations);
    ok = ok && violation <= cmp_tol && diff <= uniq_tol;
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<bool()>>> criteria = {
      {"symmetric-function suite", ac1},        {"fundamental-solution annihilation", ac2},
      {"subsolution certificate", ac3},         {"radial oracle equivalence", ac4},
      {"grid vs radial cross-check", ac5},      {"estimate suite", ac6},
      {"convergence study", ac7},               {"comparison and uniqueness", ac8}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const double t = now();
    bool ok = false;
    try {
      ok = criteria[i].second();
    } catch (const std::exception& e) {
      std::printf("  error: %s\n", e.what());
    }
    std::printf("%s %d %s (%.1f s)\n", ok ? "PASS" : "FAIL", id, criteria[i].first.c_str(), now() - t);
    std::fflush(stdout);
    failed += !ok;
  }
  return failed == 0 ? 0 : 1;
}
