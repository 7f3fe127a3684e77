#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "khessian/barriers.hpp"
#include "khessian/geometry.hpp"
#include "khessian/radial.hpp"
#include "khessian/symm.hpp"

namespace khess {

enum class NodeKind : std::uint8_t { interior, dirichlet_outer, dirichlet_inner, exterior };

std::string to_string(NodeKind kind);

/// The 16 stencil directions of the 4D grid: e_a, then e_a + e_b and e_a - e_b for a < b.
constexpr int kGridDirections = 16;
std::array<int, 4> grid_direction(int d);

/// Boundary intersection along one stencil arm of an interior node.
struct GridCut {
  std::uint8_t slot;  // 2*direction + (0 forward, 1 backward)
  double theta;       // fraction of the arm in (0, 1]
  double value;       // Dirichlet datum at the intersection
};

/// Scalar field on the 4D box [-L, L]^4 (n = 2), nodes at -L + i·h with 0 a node,
/// restricted to the annulus Ω_r = Ω \ B̄_r.
class GridField {
 public:
  GridField(const DomainSpec& domain, double r, double h, double outer_value,
            const std::function<double(const Point&)>& inner_data);

  double h() const { return h_; }
  double half_width() const { return half_width_; }
  double r() const { return r_; }
  int nodes_per_axis() const { return m_; }
  std::array<int, 4> extent() const { return {m_, m_, m_, m_}; }
  int node_count() const { return static_cast<int>(mask_.size()); }
  int unknown_count() const { return static_cast<int>(unknown_nodes_.size()); }

  Point position(int node) const;
  int node_of(const std::array<int, 4>& idx) const;
  std::array<int, 4> index_of(int node) const;
  NodeKind kind(int node) const { return mask_[node]; }
  int unknown_of(int node) const { return unknown_[node]; }
  int node_of_unknown(int id) const { return unknown_nodes_[id]; }
  /// Interior node with at least one arm cut by ∂Ω or ∂B_r.
  bool boundary_layer(int id) const { return cut_count_[id] > 0; }
  /// Cut on the given arm, or nullptr.
  const GridCut* cut(int id, int slot) const;

  /// Values by node (NaN at exterior nodes, boundary data at Dirichlet nodes).
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  Eigen::VectorXd unknowns() const;
  void set_unknowns(const Eigen::VectorXd& u);

  /// Neighbours along one arm: node index or -1 if the arm is cut.
  int neighbour(int node, int slot) const;

 private:
  double h_, half_width_, r_;
  int m_;
  std::array<int, 4> stride_;
  std::vector<NodeKind> mask_;
  std::vector<double> values_;
  std::vector<int> unknown_;
  std::vector<int> unknown_nodes_;
  std::vector<std::uint32_t> cut_offset_;
  std::vector<std::uint8_t> cut_count_;
  std::vector<GridCut> cuts_;
};

/// Second differences along the 16 directions at an interior node (Shortley–Weller at cuts).
std::array<double, kGridDirections> directional_second_differences(const GridField& field, int id);

/// Real Hessian assembled from the directional second differences: H_aa = D²_{e_a},
/// H_ab = (D²_{e_a+e_b} - D²_{e_a-e_b})/4.
RealMatrix discrete_real_hessian(const GridField& field, int id);
HermitianMatrix discrete_complex_hessian(const GridField& field, int id);

/// Central (nonuniform at cuts) first differences along the axes.
Eigen::VectorXd discrete_gradient(const GridField& field, int id);

/// Everything the grid solver needs; the barrier pipeline fills it from u̲ and ε1.
struct GridProblem {
  OperatorOrder order{2, 1};
  DomainSpec domain;
  double r = 0.0;
  double epsilon = 0.0;        // target
  double epsilon_start = 0.0;  // first continuation stage; the initial iterate should satisfy H_k >= this
  double outer_value = -1.0;
  std::function<double(const Point&)> inner_data;
  std::function<double(const Point&)> initial;
  double newton_tol = 1e-10;
  int max_iter = 50;
  double linear_tol = 1e-8;
  double continuation_factor = 0.5;
};

GridProblem grid_problem(const ApproxConfig& config, const HessianOrder& order, const DomainSpec& domain);

struct GridSolveStats {
  int stages = 0;
  int newton_iterations = 0;
  long linear_iterations = 0;
  double residual_sup = 0.0;
  std::string history;
};

struct GridSolution {
  GridField field;
  GridSolveStats stats;
};

/// Damped Newton with cone guard on (S_k(discrete Hessian) - ε)/max(1, |λ|_∞^k), ε-continuation by
/// `continuation_factor` from epsilon_start, BiCGSTAB with diagonal preconditioning for the
/// (nonsymmetric at cut nodes) linearisation. Throws NonconvergenceError with the history.
GridSolution solve_grid(const GridProblem& problem, double h);
GridSolution solve_grid(const ApproxConfig& config, const HessianOrder& order, const DomainSpec& domain, double h);

/// Scaled residual and cone membership of a field (for diagnostics and tests).
struct GridResidual {
  double sup = 0.0;
  bool in_cone = true;
};
GridResidual grid_residual(const GridField& field, const OperatorOrder& order, double epsilon);

/// The y2 = 0 slice: columns x1,x2,y1,value,kind.
void write_grid_slice_csv(const GridField& field, std::ostream& out);

/// Little-endian dump: int32 n, int32 k, float64 h, int32 extent[4], float64 values (row-major, NaN exterior),
/// then, if `metadata` is nonempty, uint32 length and that many bytes of UTF-8 text.
void write_grid_dump(const GridField& field, int k, std::ostream& out, const std::string& metadata = "");

struct GridDump {
  int n = 0;
  int k = 0;
  double h = 0.0;
  std::array<int, 4> extent{};
  std::vector<double> values;
  std::string metadata;
};
GridDump read_grid_dump(std::istream& in);

/// Loads dumped values into a field built for the same geometry; ValidationError on mismatch.
void load_grid_dump(const GridDump& dump, GridField& field);

}  // namespace khess
