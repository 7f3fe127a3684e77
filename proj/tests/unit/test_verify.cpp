#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "khessian/errors.hpp"
#include "khessian/verify.hpp"
#include "oracles.hpp"

using namespace khess;

namespace {

DomainSpec ball(int n) {
  DomainSpec d;
  d.shape = Ball{1.0};
  d.n = n;
  return d;
}

Eigen::VectorXd rho_range(double a, double b, int m) {
  Eigen::VectorXd rho(m);
  for (int i = 0; i < m; ++i) rho(i) = std::exp(std::log(a) + (std::log(b) - std::log(a)) * i / (m - 1));
  return rho;
}

struct Solve {
  ApproxConfig config;
  RadialProfile profile;
  double mesh;
};

Solve radial(int n, int k, double eps_fraction, double r, int nodes) {
  const DomainSpec d = ball(n);
  const HessianOrder o(n, k);
  const GlueConstants g = glue_constants_without_radius(d, o);
  Solve s{approx_config(d, o, eps_fraction * g.epsilon1, r), {}, 0.0};
  s.profile = solve_radial_fd(s.config, o, d, nodes);
  s.mesh = std::log(s.profile.rho(1) / s.profile.rho(0));
  return s;
}

}  // namespace

TEST_CASE("sandwich") {
  const DomainSpec d = ball(2);
  const HessianOrder o(2, 1);
  const GlueConstants g = glue_constants_without_radius(d, o);
  for (double frac : {0.25, 1.0}) {
    const ApproxConfig c = approx_config(d, o, frac * g.epsilon1, 0.2);
    const RadialProfile p = solve_radial_exact(c, o, d).sample(400);
    const SandwichResult s = check_sandwich(samples_from_profile(p, 0.0), d, o);
    CHECK(s.slack <= 1e-9);
    CHECK(s.sub_slack <= 1e-9);
  }
  const BarrierFunction sup = make_supersolution(d, o);
  const SolutionSamples on_sup = samples_from_barrier(sup, o, rho_range(0.04, 1.0, 200));
  const SandwichResult s = check_sandwich(on_sup, d, o);
  CHECK(s.upper_slack == 0.0);
  CHECK(s.sub_slack <= 0.0);
}

TEST_CASE("gradient and Hessian decay of the supersolution") {
  for (const auto [n, k] : {std::pair{2, 1}, {3, 2}, {3, 1}}) {
    const HessianOrder o(n, k);
    const SolutionSamples u = samples_from_barrier(make_supersolution(ball(n), o), o, rho_range(0.01, 1.0, 100));
    const GradientBounds gb = check_gradient_bounds(u, o);
    const double q = double(n) / k;
    CHECK(gb.C_upper == doctest::Approx(2 * q - 2).epsilon(1e-12));
    CHECK(gb.c0_lower == doctest::Approx(2 * q - 2).epsilon(1e-12));
    CHECK(check_hessian_decay(u, o) == doctest::Approx((q - 1) * std::sqrt(n - 1 + (q - 1) * (q - 1))).epsilon(1e-12));
  }
}

TEST_CASE("P quantity") {
  const DomainSpec d = ball(2);
  const HessianOrder o(2, 1);
  // ū <= −1 for |z| <= r0, so the samples stay in |z| ∈ [0.2, 0.5].
  const SolutionSamples u = samples_from_barrier(make_supersolution(d, o), o, rho_range(0.04, 0.25, 300));
  // P = 4 t^{-6} / (t^{-2} − 3)³ = 4 / (1 − 3t²)³ is increasing in t.
  const double ratio = check_P_max_principle(u, o);
  double pmax = 0.0;
  for (const auto& s : u.samples)
    if (s.region != SampleRegion::interior) pmax = std::max(pmax, 4.0 / std::pow(1 - 3 * s.z.squaredNorm(), 3));
  double imax = 0.0;
  for (const auto& s : u.samples)
    if (s.region == SampleRegion::interior) imax = std::max(imax, 4.0 / std::pow(1 - 3 * s.z.squaredNorm(), 3));
  CHECK(ratio == doctest::Approx(imax / pmax).epsilon(1e-10));
  CHECK(ratio < 1.0);
  CHECK_THROWS_AS(p_quantity(1.0, 0.5, o), PreconditionError);

  const GlueConstants g = glue_constants_without_radius(d, o);
  for (double r : {0.1, 0.3})
    for (double frac : {0.25, 1.0}) {
      const RadialProfile p = solve_radial_exact(approx_config(d, o, frac * g.epsilon1, r), o, d).sample(300);
      CHECK(check_P_max_principle(samples_from_profile(p, 0.0), o) <= 1 + 1e-8);
    }
}

TEST_CASE("H quantity") {
  const DomainSpec d = ball(2);
  const HessianOrder o(2, 1);
  const SolutionSamples u = samples_from_barrier(make_supersolution(d, o), o, rho_range(0.04, 0.25, 200));
  const HQuantityResult h = check_H_quantity(u, o, PQuantityParams::standard(u, o));
  CHECK(h.excess <= 1e-12);

  std::vector<double> excess;
  for (double frac : {1.0, 0.25, 1.0 / 16}) {
    const Solve s = radial(2, 1, frac, 0.2, 256);
    const SolutionSamples su = samples_from_profile(s.profile, s.mesh);
    for (double sf : {1.0, 0.5}) {
      const HQuantityResult r = check_H_quantity(su, o, PQuantityParams::standard(su, o, sf));
      CHECK(std::isfinite(r.excess));
      excess.push_back(r.excess);
    }
  }
  const auto [lo, hi] = std::minmax_element(excess.begin(), excess.end());
  CHECK(*hi - *lo < 1.0);
  CHECK_THROWS_AS(PQuantityParams::standard(u, o, 1.5), DomainError);
}

TEST_CASE("gradient lower bound and decay constants are r-stable") {
  std::vector<double> c0, C, hess;
  for (double r : {0.2, 0.1, 0.05}) {
    const Solve s = radial(2, 1, 0.25, r, 256);
    const SolutionSamples u = samples_from_profile(s.profile, s.mesh);
    const GradientBounds gb = check_gradient_bounds(u, HessianOrder(2, 1));
    CHECK(gb.c0_lower > 0.0);
    c0.push_back(gb.c0_lower);
    C.push_back(gb.C_upper);
    hess.push_back(check_hessian_decay(u, HessianOrder(2, 1)));
  }
  for (const auto* v : {&c0, &C, &hess}) {
    const auto [lo, hi] = std::minmax_element(v->begin(), v->end());
    CHECK((*hi - *lo) / *hi <= 0.15);
  }
}

TEST_CASE("G barrier") {
  const DomainSpec d = ball(2);
  const HessianOrder o(2, 1);
  const Solve s = radial(2, 1, 0.25, 0.2, 256);
  const SolutionSamples u = samples_from_profile(s.profile, s.mesh);
  const GBarrierParams p = GBarrierParams::measured(u, d, o);
  CHECK(p.A > 0.0);
  CHECK(p.B > 0.0);
  if (s.config.epsilon < p.epsilon2 && 0.2 <= p.r5) {
    const GBarrierResult g = check_G_barrier(u, d, o, p, s.config.epsilon, 0.2);
    CHECK(g.G_min > 0.0);
    CHECK(g.attained_on_boundary);
  }
  CHECK_THROWS_AS(check_G_barrier(u, d, o, p, 2 * p.epsilon2, 0.2), ConfigurationError);
  // With A = B = 0, G = 2ρ f' > 0 for the increasing supersolution profile.
  const SolutionSamples sup = samples_from_barrier(make_supersolution(d, o), o, rho_range(0.04, 1.0, 100));
  for (const auto& smp : sup.samples) CHECK(smp.z.dot(smp.grad) > 0.0);
  DomainSpec ns = d;
  ns.starshaped = false;
  CHECK_THROWS_AS(check_G_barrier(u, ns, o, p, s.config.epsilon, 0.2), ConfigurationError);
}

TEST_CASE("uniqueness across initial iterates") {
  const DomainSpec d = ball(2);
  const HessianOrder o(2, 1);
  const Solve s = radial(2, 1, 0.25, 0.2, 256);
  const auto [sub, g] = make_subsolution(d, o, 0.2);
  const RadialProfile other = solve_radial_fd(s.config, o, d, 256, [&](double rho) {
    Point z = Point::Zero(4);
    z(0) = std::sqrt(rho);
    return sub.value(z);
  });
  const double gap =
      check_uniqueness_scaling(samples_from_profile(s.profile, s.mesh), samples_from_profile(other, s.mesh), d.r0);
  CHECK(gap <= 1e-9);

  // (1 − t)(u + |z|^{2−2n/k}) on K, recomputed here.
  const double t = 0.9;
  double lo = 1e300, hi = -1e300;
  for (int i = 0; i < s.profile.size(); ++i)
    if (s.profile.rho(i) >= d.r0 * d.r0) {
      const double v = (1 - t) * (s.profile.f(i) + 1.0 / s.profile.rho(i));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  CHECK(scaling_probe(samples_from_profile(s.profile, s.mesh), o, d.r0, t) == doctest::Approx(hi - lo).epsilon(1e-9));
}

TEST_CASE("Cauchy study over a geometric schedule") {
  DomainSpec d = ball(2);
  d.r0 = 0.8;
  d.R0 = 1.0015;
  d.tau0 = 0.001;
  d.mu0 = 0.05;
  const HessianOrder o(2, 1);
  const GlueConstants g = glue_constants_without_radius(d, o);
  const double rmax = admissible_radius(d, o);
  std::vector<RadialProfile> solves;
  for (int j = 0; j < 3; ++j)
    solves.push_back(solve_radial_fd(approx_config(d, o, g.epsilon1 / (1 << j), rmax / (1 << j)), o, d, 256));
  const CauchyGaps gaps = cauchy_convergence_study(solves, o, d.r0, 1.0);
  REQUIRE(gaps.c0.size() == 2);
  CHECK(gaps.strictly_decreasing());
  // Mean value inequality on K = {0.8 <= |z| <= 1} with u = −1 on |z| = 1.
  for (std::size_t j = 0; j < gaps.c0.size(); ++j) CHECK(gaps.c0[j] <= gaps.c1[j] * 0.2 * (1 + 1e-6));

  // Limit gap recomputed at the last profile's nodes in K.
  double lim = 0.0;
  const RadialProfile& last = solves.back();
  for (int i = 0; i < last.size(); ++i)
    if (last.rho(i) >= d.r0 * d.r0) lim = std::max(lim, std::abs(last.f(i) - (-1.0 / last.rho(i))));
  CHECK(gaps.limit_c0 == doctest::Approx(lim).epsilon(1e-3));
  CHECK_THROWS_AS(cauchy_convergence_study({solves[0]}, o, d.r0, 1.0), ConfigurationError);
}

TEST_CASE("estimate report") {
  const Solve s = radial(2, 1, 0.25, 0.2, 256);
  const EstimateReport r = estimate_report(samples_from_profile(s.profile, s.mesh), ball(2), HessianOrder(2, 1),
                                           s.config.epsilon, 0.2);
  const auto j = nlohmann::json::parse(r.json());
  CHECK(j["schema"] == "khessian.estimate_report/1");
  CHECK(j["grad_lower_c0"].get<double>() == doctest::Approx(r.grad_lower_c0));
  CHECK(r.G_min > 0.0);
  CHECK(r.P_interior_over_boundary <= 1 + 1e-6);
  const EstimateReport again = estimate_report(samples_from_profile(s.profile, s.mesh), ball(2), HessianOrder(2, 1),
                                               s.config.epsilon, 0.2);
  CHECK(again.json() == r.json());
}
