#pragma once

#include <optional>
#include <string>
#include <vector>

#include "khessian/barriers.hpp"
#include "khessian/geometry.hpp"
#include "khessian/grid.hpp"
#include "khessian/radial.hpp"
#include "khessian/symm.hpp"

namespace khess {

enum class SampleRegion { interior, boundary_outer, boundary_inner };

/// One point of a computed solution: value, real gradient and complex Hessian.
struct SolutionSample {
  Point z;
  double value;
  Eigen::VectorXd grad;
  ComplexMatrix hess;
  SampleRegion region;
};

/// Solution data the checks read. `mesh` is the discretisation length used to scale tolerances
/// (grid h, or the log-ρ step of a profile; 0 for closed forms).
struct SolutionSamples {
  int n = 0;
  int k = 0;
  double mesh = 0.0;
  std::vector<SolutionSample> samples;
};

/// Profile nodes along the x_1 axis; the two end nodes are the boundary samples.
SolutionSamples samples_from_profile(const RadialProfile& profile, double mesh);
/// Grid interior nodes; nodes with a cut arm stand in for the boundary (split by |z| at the shell midpoint).
SolutionSamples samples_from_grid(const GridField& field, int k);
/// A barrier evaluated along the x_1 axis at the given ρ values.
SolutionSamples samples_from_barrier(const BarrierFunction& barrier, const HessianOrder& order,
                                     const Eigen::VectorXd& rho);

struct SandwichResult {
  double slack;         // max over samples of max(w - u, u - ū); ≤ tol is the contract
  double lower_slack;   // max(w - u)
  double upper_slack;   // max(u - ū)
  double sub_slack;     // max(u̲ - u), the stronger lower barrier
};
SandwichResult check_sandwich(const SolutionSamples& u, const DomainSpec& domain, const HessianOrder& order);

struct GradientBounds {
  double C_upper;  // sup |Du| |z|^{2n/k-1}
  double c0_lower; // inf |Du| |z|^{2n/k-1}
};
GradientBounds check_gradient_bounds(const SolutionSamples& u, const HessianOrder& order);

/// P = |Du|²(-u)^{-(2n-k)/(n-k)}; returns max_interior P / max_boundary P. PreconditionError if u >= 0 somewhere.
double p_quantity(double grad_norm, double value, const HessianOrder& order);
double check_P_max_principle(const SolutionSamples& u, const HessianOrder& order);

struct PQuantityParams {
  double exponent;  // (2n-k)/(n-k)
  double M;         // 2 max P + 1
  double sigma;     // <= n(n-k)/(8(2n-k)²)
  std::vector<Eigen::VectorXcd> directions;

  static double sigma_cap(const HessianOrder& order);
  /// Cap σ, M from the samples, and the fixed direction set.
  static PQuantityParams standard(const SolutionSamples& u, const HessianOrder& order, double sigma_fraction = 1.0,
                                  unsigned seed = 23);
};

/// 16 fixed unit vectors of C^n: coordinate, real and imaginary diagonals, then seeded fill.
std::vector<Eigen::VectorXcd> xi_directions(int n, int count = 16, unsigned seed = 23);

struct HQuantityResult {
  double excess;            // max_ξ (max_interior H - max_boundary H)
  double excess_eigen;      // same with u_ξξ̄ replaced by the largest eigenvalue of ∂∂̄u
  double interior_max;
  double boundary_max;
};
HQuantityResult check_H_quantity(const SolutionSamples& u, const HessianOrder& order, const PQuantityParams& params);

/// sup ‖∂∂̄u‖_F |z|^{2n/k}.
double check_hessian_decay(const SolutionSamples& u, const HessianOrder& order);

struct GBarrierParams {
  double A;
  double B;
  double c1;
  double c2;
  double epsilon2;  // C_n^k B^k/(2+A)^k
  double r5;        // (c2/(2B))^{k/(2n)}

  /// A = ½min{c1/2, c2}, B = ½·c1/(2R0²) from the measured boundary gradients.
  static GBarrierParams measured(const SolutionSamples& u, const DomainSpec& domain, const HessianOrder& order);
};

struct GBarrierResult {
  double G_min;
  double G_min_boundary;
  double G_min_interior;
  bool attained_on_boundary;
};
/// G = x·∇u + A u - B|z|² (= 2Re{z_l u_l} + Au - B|z|²). ConfigurationError if Ω is not
/// starshaped, A or B break their caps, ε >= ε2, or r > r5.
GBarrierResult check_G_barrier(const SolutionSamples& u, const DomainSpec& domain, const HessianOrder& order,
                               const GBarrierParams& params, double epsilon, double r);

/// sup |u1 - u2| over samples with |z| >= r0 (the samples must share their points).
double check_uniqueness_scaling(const SolutionSamples& u1, const SolutionSamples& u2, double r0);

/// Oscillation of (1-t)(u + |z|^{2-2n/k}) over K = {|z| >= r0}; bounded is the content of the scaling argument.
double scaling_probe(const SolutionSamples& u, const HessianOrder& order, double r0, double t = 0.9);

struct CauchyGaps {
  std::vector<double> c0;  // sup |u_j - u_{j+1}| on K
  std::vector<double> c1;  // sup ||Du_j| - |Du_{j+1}|| on K
  double limit_c0 = 0.0;   // sup |u_last - u_limit| on K
  double limit_c1 = 0.0;
  bool decreasing(double slack = 0.1) const;
  bool strictly_decreasing() const;
};

/// Gaps between consecutive radial solves on K = {r0 <= |z| <= R}, compared on a fixed ρ grid.
/// The limit is -|z|^{2-2n/k} + R^{2-2n/k} - 1 (the ε = 0, r → 0 solution on the ball).
CauchyGaps cauchy_convergence_study(const std::vector<RadialProfile>& solves, const HessianOrder& order, double r0,
                                    double outer_radius, int compare_nodes = 400);

/// Same gaps for grid solves sharing one lattice (equal h), compared at nodes interior to both with
/// |z| >= r0. The limit gaps are computed only when `ball_radius` is given.
CauchyGaps grid_cauchy_study(const std::vector<const GridField*>& solves, const HessianOrder& order, double r0,
                             std::optional<double> ball_radius);

struct EstimateReport {
  double sandwich_slack = 0.0;
  double sub_slack = 0.0;
  double grad_decay_C = 0.0;
  double grad_lower_c0 = 0.0;
  double hessian_decay_C = 0.0;
  double P_interior_over_boundary = 0.0;
  double H_excess = 0.0;
  double G_min = 0.0;
  double comparison_violation = 0.0;
  double cauchy_C1_gap = 0.0;
  std::string json() const;
};

/// All pointwise checks on one solve (G-barrier only when the domain is starshaped and ε < ε2).
EstimateReport estimate_report(const SolutionSamples& u, const DomainSpec& domain, const HessianOrder& order,
                               double epsilon, double r, unsigned seed = 23);

}  // namespace khess
