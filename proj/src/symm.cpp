#include "khessian/symm.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

#include "khessian/errors.hpp"

namespace khess {

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return std::round(c);
}

Spectrum::Spectrum(Eigen::VectorXd values) : values_(std::move(values)) {
  if (values_.size() < 1) throw ValidationError("Spectrum must have length >= 1");
  if (!values_.allFinite()) throw ValidationError("Spectrum entries must be finite");
}

Spectrum::Spectrum(std::initializer_list<double> values)
    : Spectrum(Eigen::Map<const Eigen::VectorXd>(values.begin(), static_cast<Eigen::Index>(values.size()))) {}

HermitianMatrix::HermitianMatrix(const ComplexMatrix& entries) {
  if (entries.rows() != entries.cols() || entries.rows() < 1)
    throw ValidationError("HermitianMatrix must be square and non-empty");
  if (!entries.allFinite()) throw ValidationError("HermitianMatrix entries must be finite");
  const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
  const double asym = (entries - entries.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale)
    throw ValidationError("matrix is not Hermitian (asymmetry " + std::to_string(asym) + ")");
  entries_ = 0.5 * (entries + entries.adjoint());
}

HermitianMatrix HermitianMatrix::identity(int n) {
  return HermitianMatrix(ComplexMatrix::Identity(n, n));
}

HermitianMatrix HermitianMatrix::diagonal(const Spectrum& lambda) {
  return HermitianMatrix(lambda.values().cast<std::complex<double>>().asDiagonal().toDenseMatrix());
}

OperatorOrder::OperatorOrder(int n_, int k_) : n(n_), k(k_) {
  if (n < 1 || k < 1 || k > n)
    throw DomainError("operator order requires 1 <= k <= n (got n=" + std::to_string(n) +
                      ", k=" + std::to_string(k) + ")");
}

HessianOrder::HessianOrder(int n_, int k_) : OperatorOrder(n_, k_) {
  if (k >= n)
    throw DomainError("Hessian order requires 1 <= k < n (got n=" + std::to_string(n) +
                      ", k=" + std::to_string(k) + ")");
}

Eigen::VectorXd elem_sym_all(const Spectrum& lambda) {
  const int n = lambda.size();
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n + 1);
  e(0) = 1.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j >= 1; --j) e(j) += lambda[i] * e(j - 1);
  return e;
}

double elem_sym(const Spectrum& lambda, int k) {
  const int n = lambda.size();
  if (k < 0 || k > n)
    throw DomainError("elem_sym: k=" + std::to_string(k) + " outside [0, " + std::to_string(n) + "]");
  // Truncated recurrence: only e_0..e_k are needed.
  Eigen::VectorXd e = Eigen::VectorXd::Zero(k + 1);
  e(0) = 1.0;
  for (int i = 0; i < n; ++i)
    for (int j = std::min(i + 1, k); j >= 1; --j) e(j) += lambda[i] * e(j - 1);
  return e(k);
}

double elem_sym_reduced(const Spectrum& lambda, int k, int i) {
  const int n = lambda.size();
  if (i < 0 || i >= n) throw DomainError("elem_sym_reduced: index " + std::to_string(i) + " out of range");
  if (k < 0 || k > n - 1) throw DomainError("elem_sym_reduced: k outside [0, n-1]");
  if (n == 1) return 1.0;  // k == 0
  Eigen::VectorXd rest(n - 1);
  for (int j = 0, m = 0; j < n; ++j)
    if (j != i) rest(m++) = lambda[j];
  return elem_sym(Spectrum(rest), k);
}

bool in_gamma_k(const Spectrum& lambda, int k, bool strict, double tol) {
  if (k < 1 || k > lambda.size()) throw DomainError("in_gamma_k: k outside [1, n]");
  const Eigen::VectorXd e = elem_sym_all(lambda);
  for (int j = 1; j <= k; ++j) {
    if (strict ? !(e(j) > 0.0) : !(e(j) >= -tol)) return false;
  }
  return true;
}

double gamma_k_margin(const Spectrum& lambda, int k) {
  if (k < 1 || k > lambda.size()) throw DomainError("gamma_k_margin: k outside [1, n]");
  const Eigen::VectorXd e = elem_sym_all(lambda);
  return e.segment(1, k).minCoeff();
}

double maclaurin_gap(const Spectrum& lambda, int k, int l) {
  const int n = lambda.size();
  if (k < 1 || k > n || l < 1 || l > k) throw DomainError("maclaurin_gap: need 1 <= l <= k <= n");
  if (!in_gamma_k(lambda, k, true)) throw PreconditionError("maclaurin_gap: λ ∉ Γ_k");
  const Eigen::VectorXd e = elem_sym_all(lambda);
  return std::pow(e(l) / binomial(n, l), 1.0 / l) - std::pow(e(k) / binomial(n, k), 1.0 / k);
}

double concavity_probe(const Spectrum& lambda1, const Spectrum& lambda2, int k, double t) {
  if (lambda1.size() != lambda2.size()) throw ValidationError("concavity_probe: size mismatch");
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("concavity_probe: t outside [0, 1]");
  if (!in_gamma_k(lambda1, k, true) || !in_gamma_k(lambda2, k, true))
    throw PreconditionError("concavity_probe: λ1, λ2 must lie in Γ_k");
  auto root = [k](const Spectrum& l) { return std::pow(elem_sym(l, k), 1.0 / k); };
  const Spectrum mid(t * lambda1.values() + (1.0 - t) * lambda2.values());
  return root(mid) - t * root(lambda1) - (1.0 - t) * root(lambda2);
}

namespace {

// Sum of k×k principal minors, subsets enumerated in lexicographic order.
double principal_minor_sum(const ComplexMatrix& a, int k) {
  const int n = static_cast<int>(a.rows());
  if (k == 0) return 1.0;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  std::complex<double> sum = 0.0;
  ComplexMatrix sub(k, k);
  while (true) {
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c) sub(r, c) = a(idx[r], idx[c]);
    if (k == 1) {
      sum += sub(0, 0);
    } else if (k == 2) {
      sum += sub(0, 0) * sub(1, 1) - sub(0, 1) * sub(1, 0);
    } else {
      sum += sub.partialPivLu().determinant();
    }
    int pos = k - 1;
    while (pos >= 0 && idx[pos] == n - k + pos) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int j = pos + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return sum.real();
}

}  // namespace

double sigma_k_hermitian(const HermitianMatrix& a, int k) {
  if (k < 0 || k > a.size()) throw DomainError("sigma_k_hermitian: k outside [0, n]");
  return principal_minor_sum(a.entries(), k);
}

double sigma_k_hermitian(const ComplexMatrix& a, int k) { return sigma_k_hermitian(HermitianMatrix(a), k); }

HermitianMatrix sigma_k_gradient(const HermitianMatrix& a, int k) {
  const int n = a.size();
  if (k < 1 || k > n) throw DomainError("sigma_k_gradient: k outside [1, n]");
  const ComplexMatrix& m = a.entries();
  ComplexMatrix g = ComplexMatrix::Zero(n, n);
  ComplexMatrix power = ComplexMatrix::Identity(n, n);
  double sign = 1.0;
  for (int j = 0; j < k; ++j) {
    g += sign * principal_minor_sum(m, k - 1 - j) * power;
    power = power * m;
    sign = -sign;
  }
  return HermitianMatrix(g);
}

Spectrum hermitian_eigenvalues(const HermitianMatrix& a) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(a.entries(), Eigen::EigenvaluesOnly);
  return Spectrum(solver.eigenvalues());
}

ComplexMatrix complex_hessian_from_real(const RealMatrix& h) {
  const Eigen::Index n = h.rows() / 2;
  if (h.rows() != 2 * n || h.cols() != h.rows())
    throw ValidationError("complex_hessian_from_real: expected a 2n×2n matrix");
  const auto xx = h.topLeftCorner(n, n);
  const auto yy = h.bottomRightCorner(n, n);
  const auto xy = h.topRightCorner(n, n);     // ∂x_j ∂y_k
  const auto yx = h.bottomLeftCorner(n, n);   // ∂y_j ∂x_k
  ComplexMatrix a(n, n);
  a.real() = 0.25 * (xx + yy);
  a.imag() = 0.25 * (xy - yx);
  return a;
}

RealMatrix real_gradient_from_complex(const ComplexMatrix& g) {
  const Eigen::Index n = g.rows();
  RealMatrix m(2 * n, 2 * n);
  // Re tr(G A) = Σ_jk Re(G_kj A_jk); differentiate entrywise, then symmetrise.
  const RealMatrix re = g.real().transpose();
  const RealMatrix im = g.imag().transpose();
  m.topLeftCorner(n, n) = 0.25 * re;
  m.bottomRightCorner(n, n) = 0.25 * re;
  m.topRightCorner(n, n) = -0.25 * im;
  m.bottomLeftCorner(n, n) = 0.25 * im;
  return 0.5 * (m + m.transpose());
}

Eigen::VectorXcd complex_gradient_from_real(const Eigen::VectorXd& grad) {
  const Eigen::Index n = grad.size() / 2;
  Eigen::VectorXcd g(n);
  for (Eigen::Index j = 0; j < n; ++j) g(j) = 0.5 * std::complex<double>(grad(j), -grad(n + j));
  return g;
}

}  // namespace khess
