#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

namespace khess {

using Point = Eigen::VectorXd;  // real coordinates (x_1..x_n, y_1..y_n) of a point in C^n
using RealMatrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;

/// Binomial coefficient C_n^k as a double (0 outside 0 <= k <= n).
double binomial(int n, int k);

/// Eigenvalue vector λ of a complex Hessian. Length >= 1, all entries finite.
class Spectrum {
 public:
  explicit Spectrum(Eigen::VectorXd values);
  Spectrum(std::initializer_list<double> values);

  int size() const { return static_cast<int>(values_.size()); }
  double operator[](int i) const { return values_[i]; }
  const Eigen::VectorXd& values() const { return values_; }

 private:
  Eigen::VectorXd values_;
};

/// n×n Hermitian matrix. Construction validates symmetry to 1e-12 (relative to max(1, |A|_max))
/// and stores the exactly Hermitian part.
class HermitianMatrix {
 public:
  explicit HermitianMatrix(const ComplexMatrix& entries);

  static HermitianMatrix identity(int n);
  static HermitianMatrix diagonal(const Spectrum& lambda);

  int size() const { return static_cast<int>(entries_.rows()); }
  const ComplexMatrix& entries() const { return entries_; }
  std::complex<double> operator()(int i, int j) const { return entries_(i, j); }

 private:
  ComplexMatrix entries_;
};

/// Order of the operator H_k on C^n. Admits 1 <= k <= n; solvers work for k = n as well.
struct OperatorOrder {
  int n;
  int k;

  OperatorOrder(int n_, int k_);
};

/// Order in the regime where the fundamental solution -|z|^{2-2n/k} exists: 1 <= k < n.
struct HessianOrder : OperatorOrder {
  HessianOrder(int n_, int k_);

  /// 2 - 2n/k, the (negative) exponent of the fundamental solution.
  double exponent() const { return 2.0 - 2.0 * n / k; }
};

// ---- elementary symmetric functions of a spectrum ------------------------------------------------

/// S_0(λ) .. S_n(λ) by the O(n²) prefix recurrence.
Eigen::VectorXd elem_sym_all(const Spectrum& lambda);

/// S_k(λ), 0 <= k <= n, by the O(nk) recurrence. S_0 = 1.
double elem_sym(const Spectrum& lambda, int k);

/// S_k(λ|i): S_k of λ with entry i removed. 0 <= k <= n-1.
double elem_sym_reduced(const Spectrum& lambda, int k, int i);

/// Γ_k membership. strict: S_j > 0 for 1 <= j <= k. closure: S_j >= -tol.
bool in_gamma_k(const Spectrum& lambda, int k, bool strict, double tol = 0.0);

/// min_{1<=j<=k} S_j(λ); positive iff λ ∈ Γ_k.
double gamma_k_margin(const Spectrum& lambda, int k);

/// (S_l/C_n^l)^{1/l} - (S_k/C_n^k)^{1/k}; throws PreconditionError if λ ∉ Γ_k.
double maclaurin_gap(const Spectrum& lambda, int k, int l);

/// S_k^{1/k}(tλ1+(1-t)λ2) - t S_k^{1/k}(λ1) - (1-t) S_k^{1/k}(λ2); λ1, λ2 must lie in Γ_k.
double concavity_probe(const Spectrum& lambda1, const Spectrum& lambda2, int k, double t);

// ---- Hermitian matrices ---------------------------------------------------------------------------

/// S_k(A) as the sum of k×k principal minors (no eigensolver). Validates Hermitian symmetry.
double sigma_k_hermitian(const HermitianMatrix& a, int k);
double sigma_k_hermitian(const ComplexMatrix& a, int k);

/// G = ∂S_k/∂A in the convention dS_k = Re tr(G dA), i.e. G_ij = ∂S_k/∂A_ji.
/// Computed as Σ_{j<k} (-1)^j S_{k-1-j}(A) A^j; equals the adjugate when k = n.
HermitianMatrix sigma_k_gradient(const HermitianMatrix& a, int k);

/// Ascending eigenvalues of a Hermitian matrix.
Spectrum hermitian_eigenvalues(const HermitianMatrix& a);

/// Complex Hessian (u_{z_j z̄_k}) from the real Hessian in coordinates (x_1..x_n, y_1..y_n),
/// with ∂/∂z = (∂_x - i∂_y)/2, so that |z|² maps to the identity.
ComplexMatrix complex_hessian_from_real(const RealMatrix& real_hessian);

/// Adjoint of complex_hessian_from_real: the symmetric real matrix M with
/// Re tr(G · complex_hessian_from_real(dH)) = Σ_ab M_ab dH_ab for every symmetric dH.
RealMatrix real_gradient_from_complex(const ComplexMatrix& g);

/// Complex gradient u_{z_j} = (u_{x_j} - i u_{y_j})/2.
Eigen::VectorXcd complex_gradient_from_real(const Eigen::VectorXd& real_gradient);

}  // namespace khess
