#pragma once

#include <iosfwd>
#include <string>

#include "khessian/config.hpp"

namespace khess::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kNonconvergence = 3, kFailedChecks = 4 };

struct Options {
  std::string out_dir;  // overrides output.dir when nonempty
  int jobs = 1;
  unsigned seed = 23;
};

/// Barrier constants, admissible radius, then the configured solver over the schedule.
/// Writes per-entry CSV (and grid dump), constants.json and summary.csv.
int cmd_solve(const RunConfig& config, const Options& options, std::ostream& log, std::ostream& err);

/// Runs the selected checks on prior artifacts (verify.solution) or on fresh solves.
/// Writes report_<i>.json and verify_summary.csv; exit 4 lists the failed checks.
int cmd_verify(const RunConfig& config, const Options& options, std::ostream& log, std::ostream& err);

/// Cauchy gaps over a geometric schedule of at least 3 levels; writes gaps.csv.
int cmd_convergence(const RunConfig& config, const Options& options, std::ostream& log, std::ostream& err);

/// `khessian_cli {solve|verify|convergence} --config PATH [--out DIR] [--jobs N] [--seed S]`.
int run(int argc, char** argv);

}  // namespace khess::cli
