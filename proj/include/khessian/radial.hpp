#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "khessian/barriers.hpp"
#include "khessian/geometry.hpp"
#include "khessian/symm.hpp"

namespace khess {

/// Regularised problem H_k[u] = ε in Ω_r with Dirichlet data.
struct ApproxConfig {
  double epsilon = 0.0;
  double r = 0.0;
  double boundary_inner = 0.0;  // value on ∂B_r
  double boundary_outer = -1.0; // value on ∂Ω
  double newton_tol = 1e-10;
  int max_iter = 50;

  /// 0 < ε <= ε1 and 0 < r <= r_max; ConfigurationError otherwise.
  void validate(const GlueConstants& constants) const;
};

/// Builds the configuration of the approximating problem: inner data u̲|∂B_r, outer data -1.
ApproxConfig approx_config(const DomainSpec& domain, const HessianOrder& order, double epsilon, double r);

/// Radial function u(z) = f(|z|²) sampled on a grid in ρ = |z|².
struct RadialProfile {
  int n = 0;
  int k = 0;
  double epsilon = 0.0;
  Eigen::VectorXd rho;
  Eigen::VectorXd f;
  Eigen::VectorXd fp;
  Eigen::VectorXd fpp;
  Eigen::VectorXd residual;
  int newton_iterations = 0;

  int size() const { return static_cast<int>(rho.size()); }

  /// Piecewise cubic Hermite interpolant of f (uses fp as slopes) and its ρ-derivative.
  double value_at(double rho_query) const;
  double slope_at(double rho_query) const;
};

/// Spectrum of the complex Hessian of f(|z|²): (f', …, f', f' + ρf'').
Spectrum radial_hessian_spectrum(double fp, double fpp, double rho, int n);

/// (S_k(λ) - ε) / max(1, |λ|_∞^k): the defect relative to the size of the products that cancel.
double scaled_residual(const Spectrum& lambda, int k, double epsilon);

/// Log-uniform grid from r² to R².
Eigen::VectorXd log_rho_grid(double r, double outer_radius, int nodes);

/// Closed-form radial solution f' = (β + cρ^{-n})^{1/k}, β = kε/(n C_{n-1}^{k-1}), with c fixed by
/// the Dirichlet gap and f recovered by adaptive Gauss–Kronrod quadrature. Admits ε = 0.
class RadialExactSolution {
 public:
  RadialExactSolution(const ApproxConfig& config, const OperatorOrder& order, double outer_radius);

  double value(double rho) const;
  double d1(double rho) const;
  double d2(double rho) const;
  Spectrum spectrum(double rho) const { return radial_hessian_spectrum(d1(rho), d2(rho), rho, n_); }

  /// Exact values on a log-uniform grid of `nodes` points (residual column from the exact derivatives).
  RadialProfile sample(int nodes) const;
  RadialProfile sample_at(const Eigen::VectorXd& rho) const;

  double beta() const { return beta_; }
  double c() const { return c_; }
  double rho_inner() const { return rho_in_; }
  double rho_outer() const { return rho_out_; }

 private:
  double integral(double rho_a, double rho_b) const;

  int n_;
  int k_;
  double epsilon_;
  double rho_in_;
  double rho_out_;
  double f_in_;
  double beta_;
  double c_;
};

/// Requires a ball; throws ConfigurationError otherwise or if the data admit no k-subharmonic solution.
RadialExactSolution solve_radial_exact(const ApproxConfig& config, const OperatorOrder& order,
                                       const DomainSpec& domain);

/// Damped Newton on the nodal residual with central differences in t = log ρ, Armijo backtracking
/// on the scaled residual sup-norm, and a cone guard keeping every nodal spectrum strictly in Γ_k.
RadialProfile solve_radial_fd(const ApproxConfig& config, const OperatorOrder& order, const DomainSpec& domain,
                              int nodes, const std::function<double(double rho)>& initial);

/// Same, starting from the ODE solution (or from u̲ when the ODE data are infeasible).
RadialProfile solve_radial_fd(const ApproxConfig& config, const HessianOrder& order, const DomainSpec& domain,
                              int nodes);

/// Scaled nodal residual recomputed from the f column with the solver's stencils (the ρ grid must be
/// log-uniform); end entries are 0. ValidationError if the grid is not log-uniform.
Eigen::VectorXd radial_fd_residual(const RadialProfile& profile, double epsilon);

/// CSV with columns rho,|z|,f,fp,fpp,residual (%.17g). Reading skips lines starting with '#';
/// ValidationError on a malformed table.
void write_profile_csv(const RadialProfile& profile, std::ostream& out);
RadialProfile read_profile_csv(std::istream& in, int n, int k);

/// Profile of a radial barrier (ū, w, ...) sampled on `rho`.
RadialProfile sample_barrier(const BarrierFunction& barrier, const OperatorOrder& order, const Eigen::VectorXd& rho);

}  // namespace khess
