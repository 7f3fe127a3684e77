#include "khessian/grid.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "khessian/errors.hpp"

namespace khess {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr std::array<std::array<int, 2>, 6> kPairs{{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

std::array<std::array<int, 4>, kGridDirections> make_directions() {
  std::array<std::array<int, 4>, kGridDirections> dirs{};
  for (int a = 0; a < 4; ++a) dirs[a][a] = 1;
  for (int p = 0; p < 6; ++p) {
    const auto [a, b] = kPairs[p];
    dirs[4 + 2 * p][a] = 1;
    dirs[4 + 2 * p][b] = 1;
    dirs[5 + 2 * p][a] = 1;
    dirs[5 + 2 * p][b] = -1;
  }
  return dirs;
}

const std::array<std::array<int, 4>, kGridDirections> kDirections = make_directions();

// First t in (0, 1] at which x + t w enters B̄_r, for |x| > r.
double inner_sphere_entry(const Point& x, const Eigen::VectorXd& w, double r) {
  const double a = w.squaredNorm();
  const double b = x.dot(w);
  const double c = x.squaredNorm() - r * r;
  if (b >= 0.0) return kInf;
  const double disc = b * b - a * c;
  if (disc < 0.0) return kInf;
  const double t = c / (-b + std::sqrt(disc));
  return t > 1.0 ? kInf : t;
}

// Nonuniform three-point weights for the second derivative with arms a·h (forward), b·h (backward).
struct Arm {
  double cp, cm, c0;
};
Arm arm_weights(double a, double b, double h) {
  const double s = 2.0 / (h * h);
  return {s / (a * (a + b)), s / (b * (a + b)), -s / (a * b)};
}

}  // namespace

std::string to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::interior: return "interior";
    case NodeKind::dirichlet_outer: return "dirichlet_outer";
    case NodeKind::dirichlet_inner: return "dirichlet_inner";
    case NodeKind::exterior: return "exterior";
  }
  return "unknown";
}

std::array<int, 4> grid_direction(int d) {
  if (d < 0 || d >= kGridDirections) throw DomainError("grid direction index out of range");
  return kDirections[d];
}

// ---- geometry of the annulus grid ---------------------------------------------------------------------

GridField::GridField(const DomainSpec& domain, double r, double h, double outer_value,
                     const std::function<double(const Point&)>& inner_data)
    : h_(h), r_(r) {
  if (domain.n != 2) throw ConfigurationError("grid solver supports n = 2 only");
  if (!(h > 0.0)) throw ConfigurationError("grid: h must be positive");
  if (!(r > 0.0)) throw ConfigurationError("grid: r must be positive");
  const double bound = outer_bound(domain);
  const int half = static_cast<int>(std::ceil(bound / h)) + 1;
  half_width_ = half * h;
  m_ = 2 * half + 1;
  stride_ = {m_ * m_ * m_, m_ * m_, m_, 1};
  const long total = static_cast<long>(m_) * m_ * m_ * m_;
  if (total > 60'000'000L) throw ConfigurationError("grid: too many nodes for this mesh width");
  mask_.assign(total, NodeKind::exterior);
  values_.assign(total, kNaN);
  unknown_.assign(total, -1);

  // Nodes closer than snap to either boundary count as boundary nodes, which keeps every
  // Shortley–Weller arm fraction above about 1e-3.
  const double snap = 1e-3 * h;
  for (int node = 0; node < total; ++node) {
    const Point x = position(node);
    if (x.norm() > r + snap && inside(domain, x) && signed_distance(domain, x) > snap) {
      mask_[node] = NodeKind::interior;
      unknown_[node] = static_cast<int>(unknown_nodes_.size());
      unknown_nodes_.push_back(node);
    }
  }
  if (unknown_nodes_.empty()) throw ConfigurationError("grid: no interior nodes; refine h");

  cut_offset_.assign(unknown_nodes_.size(), 0);
  cut_count_.assign(unknown_nodes_.size(), 0);
  for (int id = 0; id < unknown_count(); ++id) {
    const int node = unknown_nodes_[id];
    const Point x = position(node);
    cut_offset_[id] = static_cast<std::uint32_t>(cuts_.size());
    for (int slot = 0; slot < 2 * kGridDirections; ++slot) {
      const int sign = (slot % 2 == 0) ? 1 : -1;
      const auto& dir = kDirections[slot / 2];
      Eigen::VectorXd w(4);
      int nb = node;
      for (int a = 0; a < 4; ++a) {
        w(a) = sign * dir[a] * h;
        nb += sign * dir[a] * stride_[a];
      }
      const bool nb_interior = mask_[nb] == NodeKind::interior;
      double t_in = inner_sphere_entry(x, w, r);
      double t_out = nb_interior ? kInf : segment_exit(domain, x, w);
      if (!nb_interior && !std::isfinite(t_in) && !std::isfinite(t_out)) {
        // The neighbour sits on one of the boundaries up to rounding.
        (position(nb).norm() <= r + snap ? t_in : t_out) = 1.0;
      }
      if (!std::isfinite(t_in) && !std::isfinite(t_out)) continue;
      GridCut c{static_cast<std::uint8_t>(slot), 0.0, 0.0};
      if (t_in <= t_out) {
        c.theta = t_in;
        c.value = inner_data(x + t_in * w);
      } else {
        c.theta = t_out;
        c.value = outer_value;
      }
      cuts_.push_back(c);
      ++cut_count_[id];
      if (!nb_interior && mask_[nb] == NodeKind::exterior) {
        const Point y = position(nb);
        if (y.norm() <= r + snap) {
          mask_[nb] = NodeKind::dirichlet_inner;
          values_[nb] = y.norm() > 0.0 ? inner_data(y) : kNaN;
        } else {
          mask_[nb] = NodeKind::dirichlet_outer;
          values_[nb] = outer_value;
        }
      }
    }
  }
}

Point GridField::position(int node) const {
  const auto idx = index_of(node);
  Point x(4);
  for (int a = 0; a < 4; ++a) x(a) = -half_width_ + idx[a] * h_;
  return x;
}

int GridField::node_of(const std::array<int, 4>& idx) const {
  int node = 0;
  for (int a = 0; a < 4; ++a) {
    if (idx[a] < 0 || idx[a] >= m_) throw DomainError("grid index out of range");
    node += idx[a] * stride_[a];
  }
  return node;
}

std::array<int, 4> GridField::index_of(int node) const {
  std::array<int, 4> idx{};
  for (int a = 0; a < 4; ++a) {
    idx[a] = node / stride_[a];
    node -= idx[a] * stride_[a];
  }
  return idx;
}

const GridCut* GridField::cut(int id, int slot) const {
  const GridCut* begin = cuts_.data() + cut_offset_[id];
  for (int i = 0; i < cut_count_[id]; ++i)
    if (begin[i].slot == slot) return begin + i;
  return nullptr;
}

int GridField::neighbour(int node, int slot) const {
  const int sign = (slot % 2 == 0) ? 1 : -1;
  const auto& dir = kDirections[slot / 2];
  int nb = node;
  for (int a = 0; a < 4; ++a) nb += sign * dir[a] * stride_[a];
  return nb;
}

Eigen::VectorXd GridField::unknowns() const {
  Eigen::VectorXd u(unknown_count());
  for (int id = 0; id < unknown_count(); ++id) u(id) = values_[unknown_nodes_[id]];
  return u;
}

void GridField::set_unknowns(const Eigen::VectorXd& u) {
  if (u.size() != unknown_count()) throw ValidationError("grid: unknown vector has the wrong length");
  for (int id = 0; id < unknown_count(); ++id) values_[unknown_nodes_[id]] = u(id);
}

// ---- stencils ---------------------------------------------------------------------------------------

namespace {

struct ArmData {
  double a, b;    // arm fractions
  double up, um;  // values at the arm ends
  int jp, jm;     // unknown ids at the arm ends, -1 at a cut
};

ArmData arm_data(const GridField& f, int id, int d) {
  const int node = f.node_of_unknown(id);
  ArmData arm{1.0, 1.0, 0.0, 0.0, -1, -1};
  if (const GridCut* c = f.cut(id, 2 * d)) {
    arm.a = c->theta;
    arm.up = c->value;
  } else {
    const int nb = f.neighbour(node, 2 * d);
    arm.up = f.values()[nb];
    arm.jp = f.unknown_of(nb);
  }
  if (const GridCut* c = f.cut(id, 2 * d + 1)) {
    arm.b = c->theta;
    arm.um = c->value;
  } else {
    const int nb = f.neighbour(node, 2 * d + 1);
    arm.um = f.values()[nb];
    arm.jm = f.unknown_of(nb);
  }
  return arm;
}

RealMatrix hessian_from_directional(const std::array<double, kGridDirections>& d2) {
  RealMatrix hess(4, 4);
  for (int a = 0; a < 4; ++a) hess(a, a) = d2[a];
  for (int p = 0; p < 6; ++p) {
    const auto [a, b] = kPairs[p];
    hess(a, b) = hess(b, a) = 0.25 * (d2[4 + 2 * p] - d2[5 + 2 * p]);
  }
  return hess;
}

}  // namespace

std::array<double, kGridDirections> directional_second_differences(const GridField& field, int id) {
  const double u0 = field.values()[field.node_of_unknown(id)];
  std::array<double, kGridDirections> out{};
  for (int d = 0; d < kGridDirections; ++d) {
    const ArmData arm = arm_data(field, id, d);
    const Arm w = arm_weights(arm.a, arm.b, field.h());
    out[d] = w.cp * arm.up + w.cm * arm.um + w.c0 * u0;
  }
  return out;
}

RealMatrix discrete_real_hessian(const GridField& field, int id) {
  return hessian_from_directional(directional_second_differences(field, id));
}

HermitianMatrix discrete_complex_hessian(const GridField& field, int id) {
  return HermitianMatrix(complex_hessian_from_real(discrete_real_hessian(field, id)));
}

Eigen::VectorXd discrete_gradient(const GridField& field, int id) {
  const double u0 = field.values()[field.node_of_unknown(id)];
  Eigen::VectorXd g(4);
  for (int a = 0; a < 4; ++a) {
    const ArmData arm = arm_data(field, id, a);
    const double A = arm.a, B = arm.b;
    g(a) = (B * B * arm.up - A * A * arm.um + (A * A - B * B) * u0) / (A * B * (A + B) * field.h());
  }
  return g;
}

// ---- Newton continuation ------------------------------------------------------------------------------

GridProblem grid_problem(const ApproxConfig& config, const HessianOrder& order, const DomainSpec& domain) {
  auto [sub, constants] = make_subsolution(domain, order, config.r);
  config.validate(constants);
  GridProblem p;
  p.order = order;
  p.domain = domain;
  p.r = config.r;
  p.epsilon = config.epsilon;
  p.epsilon_start = constants.epsilon1;
  p.outer_value = config.boundary_outer;
  p.inner_data = [sub](const Point& z) { return sub.value(z); };
  p.initial = p.inner_data;
  p.newton_tol = config.newton_tol;
  p.max_iter = config.max_iter;
  return p;
}

namespace {

struct NodeEval {
  double residual;  // scaled
  double scale;
  bool in_cone;
  RealMatrix hess;
};

NodeEval evaluate_node(const GridField& f, int id, const OperatorOrder& order, double eps, const double* frozen) {
  NodeEval e;
  e.hess = discrete_real_hessian(f, id);
  const ComplexMatrix A = complex_hessian_from_real(e.hess);
  e.in_cone = true;
  double sk = 0.0;
  for (int j = 1; j <= order.k; ++j) {
    const double sj = sigma_k_hermitian(A, j);
    if (!(sj > 0.0)) e.in_cone = false;
    if (j == order.k) sk = sj;
  }
  if (frozen) {
    e.scale = *frozen;
  } else {
    const Spectrum lambda = hermitian_eigenvalues(HermitianMatrix(A));
    e.scale = std::max(1.0, std::pow(lambda.values().cwiseAbs().maxCoeff(), order.k));
  }
  e.residual = (sk - eps) / e.scale;
  return e;
}

struct FieldEval {
  Eigen::VectorXd residual, scale;
  bool in_cone = true;
  double sup = 0.0;
};

FieldEval evaluate_field(const GridField& f, const OperatorOrder& order, double eps, const Eigen::VectorXd* frozen) {
  const int N = f.unknown_count();
  FieldEval out;
  out.residual.resize(N);
  out.scale.resize(N);
  for (int id = 0; id < N; ++id) {
    const NodeEval e = evaluate_node(f, id, order, eps, frozen ? &(*frozen)(id) : nullptr);
    out.residual(id) = e.residual;
    out.scale(id) = e.scale;
    out.in_cone = out.in_cone && e.in_cone;
    out.sup = std::max(out.sup, std::abs(e.residual));
  }
  return out;
}

using SparseRow = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Jacobian of the scaled residual; also returns the largest absolute row sum (for the rounding floor).
SparseRow assemble_jacobian(const GridField& f, const OperatorOrder& order, const Eigen::VectorXd& scale,
                            double& max_row_sum) {
  const int N = f.unknown_count();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(N) * (2 * kGridDirections + 1));
  max_row_sum = 0.0;
  for (int id = 0; id < N; ++id) {
    const RealMatrix hess = discrete_real_hessian(f, id);
    const HermitianMatrix A(complex_hessian_from_real(hess));
    const HermitianMatrix G = sigma_k_gradient(A, order.k);
    const RealMatrix M = real_gradient_from_complex(G.entries());
    std::array<double, kGridDirections> weight{};
    for (int a = 0; a < 4; ++a) weight[a] = M(a, a);
    for (int p = 0; p < 6; ++p) {
      const auto [a, b] = kPairs[p];
      weight[4 + 2 * p] = 0.5 * M(a, b);
      weight[5 + 2 * p] = -0.5 * M(a, b);
    }
    const double s = scale(id);
    double diag = 0.0, row_sum = 0.0;
    for (int d = 0; d < kGridDirections; ++d) {
      const ArmData arm = arm_data(f, id, d);
      const Arm w = arm_weights(arm.a, arm.b, f.h());
      const double wd = weight[d] / s;
      diag += wd * w.c0;
      if (arm.jp >= 0) trip.emplace_back(id, arm.jp, wd * w.cp);
      if (arm.jm >= 0) trip.emplace_back(id, arm.jm, wd * w.cm);
      row_sum += std::abs(wd) * (std::abs(w.cp) + std::abs(w.cm) + std::abs(w.c0));
    }
    trip.emplace_back(id, id, diag);
    max_row_sum = std::max(max_row_sum, row_sum);
  }
  SparseRow J(N, N);
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

}  // namespace

GridResidual grid_residual(const GridField& field, const OperatorOrder& order, double epsilon) {
  const FieldEval e = evaluate_field(field, order, epsilon, nullptr);
  return {e.sup, e.in_cone};
}

GridSolution solve_grid(const GridProblem& problem, double h) {
  if (!problem.inner_data || !problem.initial) throw ConfigurationError("grid: boundary data and initial iterate required");
  if (!(problem.epsilon > 0.0)) throw ConfigurationError("grid: epsilon must be positive");
  if (!(problem.continuation_factor > 0.0 && problem.continuation_factor < 1.0))
    throw ConfigurationError("grid: continuation factor must lie in (0, 1)");
  GridField field(problem.domain, problem.r, h, problem.outer_value, problem.inner_data);
  // ≥ 6 cells across the shell between ∂B_r and the nearest point of ∂Ω.
  const double shell = signed_distance(problem.domain, Point::Zero(4)) - problem.r;
  if (shell < 6.0 * h * (1.0 - 1e-9)) {
    std::ostringstream os;
    os << "grid: mesh does not resolve the annulus (" << shell / h << " < 6 cells across)";
    throw ConfigurationError(os.str());
  }
  const int N = field.unknown_count();
  Eigen::VectorXd u(N);
  for (int id = 0; id < N; ++id) u(id) = problem.initial(field.position(field.node_of_unknown(id)));
  field.set_unknowns(u);

  GridSolveStats stats;
  std::ostringstream history;
  history << "stage epsilon iter residual_sup step linear_iters cone_exits\n";

  double eps = std::max(problem.epsilon, problem.epsilon_start);
  const OperatorOrder& order = problem.order;
  auto linear_solve = [&](const SparseRow& J, const Eigen::VectorXd& rhs) {
    Eigen::BiCGSTAB<SparseRow, Eigen::DiagonalPreconditioner<double>> krylov;
    krylov.setTolerance(problem.linear_tol);
    krylov.setMaxIterations(std::max(1000, 4 * static_cast<int>(std::sqrt(static_cast<double>(N)))));
    krylov.compute(J);
    Eigen::VectorXd x = krylov.solve(rhs);
    stats.linear_iterations += krylov.iterations();
    return std::make_pair(x, static_cast<long>(krylov.iterations()));
  };
  {
    // A sampled initial iterate can miss the discrete cone by the stencil's truncation error even when
    // the continuous one is strictly inside. One full Newton step is tried; for k = 1 it solves the stage.
    FieldEval state = evaluate_field(field, order, eps, nullptr);
    if (!state.in_cone) {
      double floor = 0.0;
      const SparseRow J = assemble_jacobian(field, order, state.scale, floor);
      const auto [step, its] = linear_solve(J, -state.residual);
      u += step;
      field.set_unknowns(u);
      history << 0 << ' ' << eps << " recovery " << state.sup << " 1 " << its << " -\n";
      if (!evaluate_field(field, order, eps, nullptr).in_cone)
        throw NonconvergenceError("grid: initial iterate is outside the discrete cone and one Newton step does not recover",
                                  history.str());
    }
  }
  for (;;) {
    ++stats.stages;
    FieldEval state = evaluate_field(field, order, eps, nullptr);
    if (!state.in_cone)
      throw NonconvergenceError("grid: iterate left the cone at the start of a continuation stage", history.str());
    int iter = 0;
    double floor = 0.0;
    SparseRow J = assemble_jacobian(field, order, state.scale, floor);
    double tol = std::max(problem.newton_tol, 4.0 * std::numeric_limits<double>::epsilon() * u.cwiseAbs().maxCoeff() * floor);
    history << stats.stages << ' ' << eps << ' ' << 0 << ' ' << state.sup << " - - -\n";
    while (state.sup > tol) {
      if (iter >= problem.max_iter) throw NonconvergenceError("grid Newton exceeded max_iter", history.str());
      ++iter;
      const auto [step, its] = linear_solve(J, -state.residual);

      double alpha = 1.0;
      int cone_exits = 0;
      bool accepted = false;
      const Eigen::VectorXd u_old = u;
      while (alpha > 1e-10) {
        field.set_unknowns(u_old + alpha * step);
        const FieldEval trial = evaluate_field(field, order, eps, &state.scale);
        if (!trial.in_cone) {
          ++cone_exits;
          alpha *= 0.5;
          continue;
        }
        if (trial.sup <= (1.0 - 1e-4 * alpha) * state.sup || trial.sup <= tol) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      history << stats.stages << ' ' << eps << ' ' << iter << ' ' << state.sup << ' ' << alpha << ' '
              << its << ' ' << cone_exits << '\n';
      if (!accepted) {
        field.set_unknowns(u_old);
        throw NonconvergenceError("grid Newton line search failed (cone exit or stagnation)", history.str());
      }
      u = u_old + alpha * step;
      state = evaluate_field(field, order, eps, nullptr);
      J = assemble_jacobian(field, order, state.scale, floor);
      tol = std::max(problem.newton_tol, 4.0 * std::numeric_limits<double>::epsilon() * u.cwiseAbs().maxCoeff() * floor);
    }
    stats.newton_iterations += iter;
    stats.residual_sup = state.sup;
    history << stats.stages << ' ' << eps << " done " << state.sup << '\n';
    if (eps <= problem.epsilon) break;
    eps = std::max(problem.epsilon, eps * problem.continuation_factor);
  }
  stats.history = history.str();
  return GridSolution{std::move(field), std::move(stats)};
}

GridSolution solve_grid(const ApproxConfig& config, const HessianOrder& order, const DomainSpec& domain, double h) {
  return solve_grid(grid_problem(config, order, domain), h);
}

// ---- output -------------------------------------------------------------------------------------------

void write_grid_slice_csv(const GridField& field, std::ostream& out) {
  const int m = field.nodes_per_axis();
  const int zero = m / 2;
  out << "x1,x2,y1,value,kind\n";
  char buf[160];
  for (int i0 = 0; i0 < m; ++i0)
    for (int i1 = 0; i1 < m; ++i1)
      for (int i2 = 0; i2 < m; ++i2) {
        const int node = field.node_of({i0, i1, i2, zero});
        if (field.kind(node) == NodeKind::exterior) continue;
        const Point x = field.position(node);
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,", x(0), x(1), x(2), field.values()[node]);
        out << buf << to_string(field.kind(node)) << '\n';
      }
}

namespace {

template <class T>
void put(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "dump format is little-endian");
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  out.write(bytes, sizeof(T));
}

template <class T>
T get(std::istream& in) {
  char bytes[sizeof(T)];
  in.read(bytes, sizeof(T));
  if (!in) throw ValidationError("grid dump truncated");
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace

void write_grid_dump(const GridField& field, int k, std::ostream& out, const std::string& metadata) {
  put<std::int32_t>(out, 2);
  put<std::int32_t>(out, k);
  put<double>(out, field.h());
  for (int e : field.extent()) put<std::int32_t>(out, e);
  for (int node = 0; node < field.node_count(); ++node)
    put<double>(out, field.kind(node) == NodeKind::exterior ? kNaN : field.values()[node]);
  if (!metadata.empty()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(metadata.size()));
    out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  }
}

GridDump read_grid_dump(std::istream& in) {
  GridDump d;
  d.n = get<std::int32_t>(in);
  d.k = get<std::int32_t>(in);
  d.h = get<double>(in);
  long total = 1;
  for (int a = 0; a < 4; ++a) {
    d.extent[a] = get<std::int32_t>(in);
    if (d.extent[a] <= 0 || d.extent[a] > 1000) throw ValidationError("grid dump: bad extent");
    total *= d.extent[a];
  }
  d.values.resize(total);
  for (long i = 0; i < total; ++i) d.values[i] = get<double>(in);
  if (in.peek() != std::char_traits<char>::eof()) {
    const auto len = get<std::uint32_t>(in);
    d.metadata.resize(len);
    if (!in.read(d.metadata.data(), len)) throw ValidationError("grid dump: truncated metadata trailer");
  }
  return d;
}

void load_grid_dump(const GridDump& dump, GridField& field) {
  if (dump.n != 2 || dump.extent != field.extent() || std::abs(dump.h - field.h()) > 1e-14 * field.h())
    throw ValidationError("grid dump does not match the configured geometry");
  for (int node = 0; node < field.node_count(); ++node)
    if (field.kind(node) == NodeKind::interior) {
      if (!std::isfinite(dump.values[node])) throw ValidationError("grid dump: non-finite interior value");
      field.values()[node] = dump.values[node];
    }
}

}  // namespace khess
