#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "khessian/symm.hpp"

namespace khess {

struct Ball {
  double radius;
};

/// Axis-aligned ellipsoid Σ x_i²/a_i² < 1 in R^{2n}; axes ordered like Point (x_1..x_n, y_1..y_n).
struct Ellipsoid {
  Eigen::VectorXd axes;
};

/// Experimental: Ω = {φ < 0}, starshaped w.r.t. the origin, contained in B_{bounding_radius}.
/// Distances are computed by a local closest-point Newton solve, reliable only near ∂Ω.
struct LevelSet {
  std::function<double(const Point&)> phi;
  double bounding_radius;
};

using DomainShape = std::variant<Ball, Ellipsoid, LevelSet>;

/// Domain together with the constants of the subsolution construction.
struct DomainSpec {
  DomainShape shape;
  int n = 2;              // complex dimension; points live in R^{2n}
  double r0 = 0.5;        // B_{r0} ⊂⊂ Ω
  double R0 = 2.0;        // Ω ⊂⊂ B_{(1-τ0)R0}
  double tau0 = 0.1;
  double C_Omega = 1.0;
  double mu0 = 0.1;
  bool starshaped = true;
  int boundary_samples = 512;  // density for the sampled invariants

  /// Checks the sampled invariants (inclusions, μ0 < 1/(2C_Ω), starshapedness);
  /// throws ConfigurationError naming the first violated one.
  void validate() const;

  std::string kind() const;
  int real_dim() const { return 2 * n; }
};

/// Distance to ∂Ω with its first and second real derivatives.
struct DistanceJet {
  double d;
  Eigen::VectorXd grad;
  RealMatrix hess;
};

/// Signed distance: positive inside Ω, negative outside.
double signed_distance(const DomainSpec& domain, const Point& z);

/// dist(z, ∂Ω) for z ∈ Ω̄; throws DomainError for z outside Ω̄.
double distance(const DomainSpec& domain, const Point& z);

/// Strict membership z ∈ Ω (closed-form test for balls and ellipsoids, φ < 0 for level sets).
bool inside(const DomainSpec& domain, const Point& z);

/// Radius of a ball around the origin containing Ω̄.
double outer_bound(const DomainSpec& domain);

/// First t in (0, 1] with x + t·w ∈ ∂Ω for x ∈ Ω, or +inf if the segment stays inside.
/// Exact for balls and ellipsoids; bisection on φ for level sets (endpoint sign only).
double segment_exit(const DomainSpec& domain, const Point& x, const Eigen::VectorXd& w);

/// Distance and derivatives. Ball: closed form. Ellipsoid: foot point plus the principal
/// curvature formula D²d = -T W (I - dW)^{-1} Tᵀ. Level set: finite differences.
DistanceJet distance_jet(const DomainSpec& domain, const Point& z);

/// Closest boundary point and outward unit normal there.
struct BoundaryPoint {
  Point y;
  Eigen::VectorXd normal;
};
BoundaryPoint foot_point(const DomainSpec& domain, const Point& z);

/// Deterministic quasi-uniform samples of ∂Ω (seeded radial projection of Gaussian directions).
std::vector<BoundaryPoint> boundary_samples(const DomainSpec& domain, int count, unsigned seed = 7);

/// Defining function ρ = -d + C_Ω d² and its derivatives, from a distance jet.
struct ScalarJet {
  double value;
  Eigen::VectorXd grad;
  RealMatrix hess;

  ComplexMatrix complex_hessian() const { return complex_hessian_from_real(hess); }
};
ScalarJet defining_function(const DomainSpec& domain, const Point& z);

struct CertificateResult {
  bool certified;
  double worst_margin;  // min over samples of min_{j<=k} S_j(λ(-d_{ij̄} + C_Ω (d²)_{ij̄}))
  std::optional<Point> violation;
};

/// (k-1)-pseudoconvexity test at `samples` boundary points, Hessians by 4th-order finite
/// differences of the signed distance with step 1e-4·r0.
CertificateResult pseudoconvexity_certificate(const DomainSpec& domain, int k, int samples);

/// min of H_k[ρ] over the closed collar {d <= 2μ0}; also verifies B_{r0} ⊂⊂ {d > 2μ0}.
/// Throws ConfigurationError if the minimum is not positive or ρ leaves Γ_k.
double collar_subharmonicity(const DomainSpec& domain, const OperatorOrder& order, int boundary_count = 0,
                             int depth_levels = 65);

/// min over boundary samples of z·ν (the starshape constant).
double starshape_constant(const DomainSpec& domain, int samples);

/// Smallest radius of curvature of ∂Ω (ball: radius; ellipsoid: a_min²/a_max; level set: sampled).
double min_curvature_radius(const DomainSpec& domain);

/// Picks C_Ω by doubling then bisecting until the certificate passes, then
/// μ0 = min(1/(4C_Ω), (dist(0,∂Ω) - r0)/4, curvature radius/4).
DomainSpec auto_configure(DomainSpec domain, int k, int samples = 256);

}  // namespace khess
