#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "khessian/barriers.hpp"
#include "khessian/geometry.hpp"

namespace khess {

enum class SolverKind { radial, radial_exact, grid };
enum class ScheduleMode { product, geometric };

std::string to_string(SolverKind kind);

/// One (ε, r, mesh) configuration of a run.
struct ScheduleEntry {
  int index = 0;
  double epsilon = 0.0;
  double r = 0.0;
  int nodes = 0;   // radial solvers
  double h = 0.0;  // grid solver
};

struct CheckSelection {
  bool sandwich = true;
  bool gradient = true;
  bool P = true;
  bool H = true;
  bool hessian = true;
  bool G = true;
  bool comparison = false;
  bool uniqueness = false;
  bool G_explicit = false;  // G was named in checks.list

  static CheckSelection parse(const std::string& list);
  std::string list() const;
};

/// Unset tolerances are derived from the mesh when the check runs.
struct CheckTolerances {
  std::optional<double> sandwich;
  std::optional<double> P;
  double stability = 0.15;     // gradient and Hessian decay constants, c0
  double H_stability = 0.25;   // H excess
  double cauchy_slack = 0.1;   // "each gap <= previous" slack
};

/// Parsed run configuration. Format: one `key = value` per line, `#` starts a comment,
/// sections are dotted key prefixes, lists are comma separated.
struct RunConfig {
  int n = 0;
  int k = 0;
  DomainSpec domain;
  bool auto_configure = false;

  SolverKind solver = SolverKind::radial;
  ScheduleMode mode = ScheduleMode::product;
  std::vector<double> epsilon;           // absolute values
  std::vector<double> epsilon_fraction;  // multiples of ε1
  std::vector<double> r;
  std::vector<double> r_fraction;  // multiples of r_max
  int levels = 0;                  // geometric: ε_j = ε1·2^{-j}, r_j = r_max·2^{-j}
  std::vector<int> nodes;
  std::vector<double> h;
  double newton_tol = 1e-10;
  int max_iter = 50;

  CheckSelection checks;
  CheckTolerances tolerances;
  double compact_r0 = 0.0;  // K = Ω \ B_{compact_r0}; defaults to domain.r0
  int compare_nodes = 400;

  std::string output_dir = "out";
  bool write_dump = true;
  std::vector<std::string> verify_solution;  // prior artifacts to verify instead of solving

  std::map<std::string, std::string> raw;  // normalised key/value pairs

  HessianOrder order() const { return HessianOrder(n, k); }

  /// FNV-1a 64-bit hash of the sorted normalised key/value lines, 16 hex digits.
  std::string hash() const;

  /// Concrete schedule once ε1 and r_max are known; ConfigurationError if it is empty.
  std::vector<ScheduleEntry> entries(const GlueConstants& constants) const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace khess
