#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "khessian/errors.hpp"
#include "khessian/radial.hpp"
#include "oracles.hpp"

using namespace khess;

namespace {

DomainSpec ball(int n) {
  DomainSpec d;
  d.shape = Ball{1.0};
  d.n = n;
  return d;
}

double sup_error(const RadialProfile& a, const RadialProfile& b) { return (a.f - b.f).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("radial spectrum") {
  const int n = 3;
  const Spectrum ones = radial_hessian_spectrum(1.0, 0.0, 0.7, n);
  for (int k = 1; k <= n; ++k) CHECK(elem_sym(ones, k) == doctest::Approx(binomial(n, k)));
  for (int k = 1; k < n; ++k) {
    // f = −ρ^{1−n/k}
    const double q = 1.0 - double(n) / k, rho = 0.37;
    const Spectrum s = radial_hessian_spectrum(-q * std::pow(rho, q - 1), -q * (q - 1) * std::pow(rho, q - 2), rho, n);
    CHECK(std::abs(elem_sym(s, k)) < 1e-12 * std::pow(s.values().cwiseAbs().maxCoeff(), k));
  }

  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    // f(ρ) = a ρ + b ρ², Hessian by finite differences of f(|z|²) at a random point.
    const double a = u(rng), b = u(rng);
    const auto fz = [&](const Eigen::VectorXd& y) { return a * y.squaredNorm() + b * std::pow(y.squaredNorm(), 2); };
    const Point z = 0.8 * oracle::sphere_point(rng, 2 * n);
    const double rho = z.squaredNorm();
    Eigen::VectorXd fd = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(
                             oracle::complex_hessian(oracle::fd_hessian(fz, z, 1e-3)), Eigen::EigenvaluesOnly)
                             .eigenvalues();
    Eigen::VectorXd an = radial_hessian_spectrum(a + 2 * b * rho, 2 * b, rho, n).values();
    std::sort(an.data(), an.data() + n);
    CHECK((fd - an).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("exact solver: ε = 0 recovers the supersolution") {
  for (const auto [n, k] : {std::pair{2, 1}, {3, 2}, {3, 1}}) {
    const DomainSpec d = ball(n);
    const double p = 2.0 - 2.0 * n / k;
    const auto ubar = [&](double t) { return -std::pow(t, p) + std::pow(d.r0, p) - 1; };
    ApproxConfig c;
    c.epsilon = 0.0;
    c.r = 0.2;
    c.boundary_inner = ubar(0.2);
    c.boundary_outer = ubar(1.0);
    const RadialExactSolution ex(c, OperatorOrder(n, k), 1.0);
    for (double t = 0.2; t <= 1.0; t += 0.01) CHECK(std::abs(ex.value(t * t) - ubar(t)) < 1e-9 * std::max(1.0, std::abs(ubar(t))));
  }
}

TEST_CASE("exact solver: residual and monotonicity in ε") {
  const DomainSpec d = ball(3);
  const HessianOrder o(3, 2);
  const GlueConstants g = glue_constants_without_radius(d, o);
  const ApproxConfig c = approx_config(d, o, g.epsilon1 / 4, 0.2);
  const RadialExactSolution ex(c, o, 1.0);
  const RadialProfile s = ex.sample(200);
  for (int i = 0; i < s.size(); ++i) {
    const double hk = oracle::radial_sigma(3, 2, s.fp(i), s.fpp(i), s.rho(i));
    CHECK(std::abs(hk - c.epsilon) < 1e-9 * std::max(1.0, std::pow(std::abs(s.fp(i)), 2)));
  }
  CHECK(s.f(0) == doctest::Approx(c.boundary_inner));
  CHECK(s.f(s.size() - 1) == doctest::Approx(-1.0));

  ApproxConfig bigger = c;
  bigger.epsilon = g.epsilon1;
  const RadialExactSolution ex2(bigger, o, 1.0);
  for (double t = 0.25; t < 0.99; t += 0.05) CHECK(ex2.value(t * t) < ex.value(t * t));
}

TEST_CASE("FD solver matches the quadrature oracle with O(h²) error") {
  const DomainSpec d = ball(2);
  const HessianOrder o(2, 1);
  const GlueConstants g = glue_constants_without_radius(d, o);
  const ApproxConfig c = approx_config(d, o, g.epsilon1 / 4, 0.5);
  const RadialExactSolution ex(c, o, 1.0);
  double prev = 0.0;
  for (int nodes : {64, 128, 256}) {
    const RadialProfile p = solve_radial_fd(c, o, d, nodes);
    const double err = sup_error(p, ex.sample_at(p.rho));
    if (nodes == 256) CHECK(err <= 1e-5);
    if (prev > 0.0) CHECK(std::log2(prev / err) == doctest::Approx(2.0).epsilon(0.1));
    prev = err;
    CHECK(p.f(0) == c.boundary_inner);
    CHECK(p.f(nodes - 1) == c.boundary_outer);
    CHECK(radial_fd_residual(p, c.epsilon).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("FD solver from the subsolution at ε = ε1") {
  const DomainSpec d = ball(2);
  const HessianOrder o(2, 1);
  const auto [sub, g] = make_subsolution(d, o, 0.2);
  const ApproxConfig c = approx_config(d, o, g.epsilon1, 0.2);
  const RadialProfile p = solve_radial_fd(c, o, d, 64, [&](double rho) {
    Point z = Point::Zero(4);
    z(0) = std::sqrt(rho);
    return sub.value(z);
  });
  CHECK(p.newton_iterations < 30);
  CHECK(p.residual.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("FD solver rejects bad input") {
  const DomainSpec d = ball(2);
  const HessianOrder o(2, 1);
  const GlueConstants g = glue_constants_without_radius(d, o);
  const ApproxConfig c = approx_config(d, o, g.epsilon1 / 4, 0.2);
  CHECK_THROWS_AS(solve_radial_fd(c, o, d, 8), ConfigurationError);
  // −ρ is superharmonic: outside the cone.
  CHECK_THROWS_AS(solve_radial_fd(c, o, d, 64, [](double rho) { return -rho; }), NonconvergenceError);
  ApproxConfig too_big = c;
  too_big.epsilon = 2 * g.epsilon1;
  CHECK_THROWS_WITH_AS(too_big.validate(g), doctest::Contains("epsilon exceeds epsilon1"), ConfigurationError);
}

TEST_CASE("profile CSV round trip") {
  const DomainSpec d = ball(2);
  const HessianOrder o(2, 1);
  const GlueConstants g = glue_constants_without_radius(d, o);
  const RadialProfile p = solve_radial_fd(approx_config(d, o, g.epsilon1 / 4, 0.2), o, d, 64);
  std::stringstream ss;
  write_profile_csv(p, ss);
  const RadialProfile q = read_profile_csv(ss, 2, 1);
  CHECK(q.size() == p.size());
  CHECK((q.f - p.f).cwiseAbs().maxCoeff() == 0.0);
  CHECK((q.fpp - p.fpp).cwiseAbs().maxCoeff() == 0.0);
  std::stringstream bad("rho,|z|,f,fp,fpp,residual\n0.1,x\n");
  CHECK_THROWS_AS(read_profile_csv(bad, 2, 1), ValidationError);
}
