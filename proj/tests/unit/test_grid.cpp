#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "khessian/errors.hpp"
#include "khessian/grid.hpp"
#include "oracles.hpp"

using namespace khess;

namespace {

DomainSpec ball() {
  DomainSpec d;
  d.shape = Ball{1.0};
  d.n = 2;
  return d;
}

DomainSpec ellipsoid() {
  DomainSpec d;
  d.n = 2;
  d.shape = Ellipsoid{(Eigen::VectorXd(4) << 1, 1.2, 1, 1.2).finished()};
  return d;
}

void sample(GridField& f, const std::function<double(const Point&)>& u) {
  Eigen::VectorXd x(f.unknown_count());
  for (int id = 0; id < f.unknown_count(); ++id) x(id) = u(f.position(f.node_of_unknown(id)));
  f.set_unknowns(x);
}

}  // namespace

TEST_CASE("discrete Hessian is exact on quadratics") {
  const auto sq = [](const Point& z) { return z.squaredNorm(); };
  GridField f(ball(), 0.3, 0.125, 1.0, sq);
  sample(f, sq);
  double worst = 0.0;
  for (int id = 0; id < f.unknown_count(); ++id)
    worst = std::max(worst, (discrete_complex_hessian(f, id).entries() - ComplexMatrix::Identity(2, 2)).norm());
  CHECK(worst < 1e-10);

  // Re(z1²) = x1² − y1² is pluriharmonic.
  const auto re = [](const Point& z) { return z(0) * z(0) - z(2) * z(2); };
  GridField g(ball(), 0.3, 0.125, 0.0, re);
  sample(g, re);
  worst = 0.0;
  for (int id = 0; id < g.unknown_count(); ++id)
    if (!g.boundary_layer(id)) worst = std::max(worst, discrete_complex_hessian(g, id).entries().norm());
  CHECK(worst < 1e-10);
}

TEST_CASE("discrete Hessian of the fundamental solution is second order") {
  const HessianOrder o(2, 1);
  const auto fund = [&](const Point& z) { return fundamental_solution(z, o).value; };
  Point probe = Point::Zero(4);
  probe << 0.5, 0.5, 0.5, 0.5;  // |z| = 1, a grid node for h = 1/2^m
  std::vector<double> errs;
  for (double h : {0.125, 0.0625}) {
    GridField f(ball(), 0.3, h, -1.0, fund);
    sample(f, fund);
    int node = -1;
    for (int i = 0; i < f.node_count(); ++i)
      if ((f.position(i) - 0.9 * probe).norm() < 1e-12) node = i;
    if (node < 0) {
      // 0.9·probe is not on this lattice; use the nearest interior node.
      double best = 1e9;
      for (int id = 0; id < f.unknown_count(); ++id) {
        const double dist = (f.position(f.node_of_unknown(id)) - 0.9 * probe).norm();
        if (dist < best) best = dist, node = f.node_of_unknown(id);
      }
    }
    const int id = f.unknown_of(node);
    const Point z = f.position(node);
    const ComplexMatrix exact = fundamental_solution(z, o).complex_hessian();
    errs.push_back((discrete_complex_hessian(f, id).entries() - exact).norm() / exact.norm());
  }
  CHECK(errs[1] < errs[0]);
  CHECK(std::log2(errs[0] / errs[1]) == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("k = 1 grid solve is a Poisson solve") {
  const DomainSpec d = ball();
  const HessianOrder o(2, 1);
  const GlueConstants g = glue_constants_without_radius(d, o);
  const ApproxConfig c = approx_config(d, o, g.epsilon1 / 4, 0.2);
  const RadialExactSolution ex(c, o, 1.0);
  std::vector<double> errs;
  const double hs[] = {0.125, 0.125 / std::sqrt(2.0)};
  for (double h : hs) {
    const GridSolution s = solve_grid(c, o, d, h);
    // Linear residual: one Newton step per continuation stage (plus at most one for the stage check).
    CHECK(s.stats.newton_iterations <= 2 * s.stats.stages + 1);
    CHECK(s.stats.residual_sup <= 1e-8);
    const GridField& f = s.field;
    double err = 0.0, umax = 0.0;
    for (int id = 0; id < f.unknown_count(); ++id) {
      const int node = f.node_of_unknown(id);
      err = std::max(err, std::abs(f.values()[node] - ex.value(f.position(node).squaredNorm())));
      umax = std::max(umax, std::abs(f.values()[node]));
    }
    errs.push_back(err);
    CHECK(err <= 5 * h * h * umax);
  }
  CHECK(std::log(errs[0] / errs[1]) / std::log(hs[0] / hs[1]) == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("ellipsoid grid solve respects the barriers") {
  const DomainSpec d = ellipsoid();
  const HessianOrder o(2, 1);
  const GlueConstants g = glue_constants_without_radius(d, o);
  const double r = 0.3;
  const ApproxConfig c = approx_config(d, o, g.epsilon1 / 4, r);
  const double h = 0.1;
  const GridSolution s = solve_grid(c, o, d, h);
  const auto [sub, g2] = make_subsolution(d, o, r);
  const BarrierFunction sup = make_supersolution(d, o);
  const GridField& f = s.field;
  double umax = 0.0;
  for (int id = 0; id < f.unknown_count(); ++id) umax = std::max(umax, std::abs(f.values()[f.node_of_unknown(id)]));
  for (int id = 0; id < f.unknown_count(); ++id) {
    const Point z = f.position(f.node_of_unknown(id));
    const double u = f.values()[f.node_of_unknown(id)];
    CHECK(u >= sub.value(z) - 2 * h * h * umax);
    CHECK(u <= sup.value(z) + 2 * h * h * umax);
  }
  CHECK(grid_residual(f, o, c.epsilon).sup <= 1e-8);
}

TEST_CASE("grid dump round trip") {
  const DomainSpec d = ball();
  const HessianOrder o(2, 1);
  const GlueConstants g = glue_constants_without_radius(d, o);
  const GridSolution s = solve_grid(approx_config(d, o, g.epsilon1 / 4, 0.2), o, d, 0.125);
  std::stringstream ss;
  write_grid_dump(s.field, 1, ss, "{\"tag\":1}");
  const GridDump dump = read_grid_dump(ss);
  CHECK(dump.n == 2);
  CHECK(dump.k == 1);
  CHECK(dump.h == 0.125);
  CHECK(dump.metadata == "{\"tag\":1}");
  GridField copy(d, 0.2, 0.125, -1.0, [](const Point&) { return 0.0; });
  load_grid_dump(dump, copy);
  CHECK((copy.unknowns() - s.field.unknowns()).cwiseAbs().maxCoeff() == 0.0);

  std::stringstream plain;
  write_grid_dump(s.field, 1, plain);
  CHECK(read_grid_dump(plain).metadata.empty());
  std::stringstream junk("not a dump");
  CHECK_THROWS(read_grid_dump(junk));
}

TEST_CASE("grid rejects bad configuration") {
  DomainSpec d3 = ball();
  d3.n = 3;
  CHECK_THROWS_AS(GridField(d3, 0.3, 0.1, -1.0, [](const Point&) { return 0.0; }), ConfigurationError);
  CHECK_THROWS_AS(GridField(ball(), 0.3, -0.1, -1.0, [](const Point&) { return 0.0; }), ConfigurationError);
}
