#pragma once

#include <functional>
#include <string>
#include <utility>

#include "khessian/geometry.hpp"
#include "khessian/symm.hpp"

namespace khess {

enum class BarrierLabel { subsolution, supersolution, w, rho_term, fundamental, glued };

std::string to_string(BarrierLabel label);

/// A C² function given by an evaluator of (value, real gradient, real Hessian).
struct BarrierFunction {
  std::function<ScalarJet(const Point&)> evaluate;
  BarrierLabel label;

  ScalarJet operator()(const Point& z) const { return evaluate(z); }
  double value(const Point& z) const { return evaluate(z).value; }
};

/// Real jet of z ↦ F(|z|²) given F, F', F'' at ρ = |z|².
ScalarJet radial_jet(const Point& z, double f, double fp, double fpp);

/// -|z|^{2-2n/k} with analytic derivatives. Throws SingularityError at z = 0.
ScalarJet fundamental_solution(const Point& z, const HessianOrder& order);

/// Complex-Hessian spectrum of the fundamental solution at ρ = |z|²: (a,…,a,b) with
/// a = (n/k-1)ρ^{-n/k}, b = -(n/k-1)²ρ^{-n/k}.
Spectrum fundamental_spectrum(double rho, const HessianOrder& order);

struct GlueConstants {
  double a0;        // ½((1-τ0)^{2-2n/k} - 1) R0^{2-2n/k}
  double K0;        // r0^{2-2n/k} / (μ0 - C_Ω μ0²)
  double M0;        // smallest M0 > 1 found for K0(-μ0/M0 + C_Ω(μ0/M0)²) >= -a0/2
  double delta;     // min{a0/2, R0^{2-2n/k}}
  double epsilon0;  // measured collar minimum of H_k[ρ]
  double epsilon1;  // min{C_n^k a0^k R0^{-2k}, K0^k ε0}
  double r_max;     // largest admissible puncture radius
};

/// Everything except r_max (which needs the subsolution itself); r_max is set to 0.
GlueConstants glue_constants_without_radius(const DomainSpec& domain, const HessianOrder& order);

/// w = -|z|^{2-2n/k} + R0^{2-2n/k} - 1 + a0 |z|²/R0².
BarrierFunction make_w(const DomainSpec& domain, const HessianOrder& order);

/// Even convex C² function equal to |s|/2 for |s| >= δ: φ(s) = 3δ/16 + 3s²/(8δ) - s⁴/(16δ³) inside.
struct SmoothAbsHalf {
  double delta;

  double value(double s) const;
  double d1(double s) const;
  double d2(double s) const;
};

/// H = (g+h)/2 + φ_δ(g-h): equals max(g,h) off the band |g-h| < δ, and
/// D²H = (½+φ')D²g + (½-φ')D²h + φ''∇(g-h)∇(g-h)ᵀ.
BarrierFunction smooth_max_glue(BarrierFunction g, BarrierFunction h, double delta);

/// The glued strict subsolution (independent of r), given its constants.
BarrierFunction subsolution_from_constants(const DomainSpec& domain, const HessianOrder& order,
                                           const GlueConstants& constants);

/// Builds u̲ and all constants; throws ConfigurationError if r > r_max or no M0 exists.
std::pair<BarrierFunction, GlueConstants> make_subsolution(const DomainSpec& domain, const HessianOrder& order,
                                                           double r);

/// ū = -|z|^{2-2n/k} + r0^{2-2n/k} - 1.
BarrierFunction make_supersolution(const DomainSpec& domain, const HessianOrder& order);

/// Which of the boundary inequalities hold at radius r (sampled on ∂B_r).
struct RadiusCheck {
  double max_sub_on_sphere;       // must be <= -1
  double min_super_minus_sub;     // must be >= 0
  double max_sub_plus_half_power; // u̲ + ½r^{2-2n/k}, must be <= 0
  bool ok() const { return max_sub_on_sphere <= -1.0 && min_super_minus_sub >= 0.0 && max_sub_plus_half_power <= 0.0; }
};
RadiusCheck check_radius(const DomainSpec& domain, const HessianOrder& order, const BarrierFunction& sub, double r,
                         int directions = 64);

/// Largest r in (0, r0] with every check_radius inequality satisfied (bisection to 1e-6·r0).
double admissible_radius(const DomainSpec& domain, const HessianOrder& order);
double admissible_radius(const DomainSpec& domain, const HessianOrder& order, const BarrierFunction& sub);

/// Deterministic unit directions in R^m: ± coordinate vectors, then seeded Gaussian directions.
std::vector<Eigen::VectorXd> unit_directions(int m, int count, unsigned seed = 11);

}  // namespace khess
