#include "khessian/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>

#include "khessian/errors.hpp"
#include "khessian/grid.hpp"
#include "khessian/radial.hpp"
#include "khessian/verify.hpp"

namespace khess::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Everything a run needs besides the schedule entries.
struct Context {
  RunConfig config;
  Options options;
  HessianOrder order;
  DomainSpec domain;
  GlueConstants constants{};
  BarrierFunction sub;
  std::string hash;
  Json constants_json;
  std::vector<ScheduleEntry> entries;
  fs::path out;

  Context(const RunConfig& c, const Options& o) : config(c), options(o), order(c.order()), domain(c.domain) {}
};

Context prepare(const RunConfig& config, const Options& options, std::ostream& log) {
  Context ctx(config, options);
  if (config.auto_configure) ctx.domain = auto_configure(ctx.domain, config.k);
  ctx.domain.validate();
  ctx.constants = glue_constants_without_radius(ctx.domain, ctx.order);
  ctx.sub = subsolution_from_constants(ctx.domain, ctx.order, ctx.constants);
  ctx.constants.r_max = admissible_radius(ctx.domain, ctx.order, ctx.sub);
  ctx.hash = config.hash();
  const GlueConstants& c = ctx.constants;
  ctx.constants_json = Json{{"a0", c.a0},           {"K0", c.K0},
                            {"M0", c.M0},           {"delta", c.delta},
                            {"epsilon0", c.epsilon0}, {"epsilon1", c.epsilon1},
                            {"r_max", c.r_max},     {"C_Omega", ctx.domain.C_Omega},
                            {"mu0", ctx.domain.mu0}};
  ctx.entries = config.entries(ctx.constants);
  ctx.out = options.out_dir.empty() ? fs::path(config.output_dir) : fs::path(options.out_dir);
  fs::create_directories(ctx.out);
  log << "config " << ctx.hash << ": n=" << config.n << " k=" << config.k << " domain=" << ctx.domain.kind()
      << " solver=" << to_string(config.solver) << " epsilon1=" << fmt(c.epsilon1) << " r_max=" << fmt(c.r_max)
      << " entries=" << ctx.entries.size() << '\n';
  return ctx;
}

Json entry_json(const Context& ctx, const ScheduleEntry& e) {
  Json j{{"index", e.index}, {"solver", to_string(ctx.config.solver)}, {"epsilon", e.epsilon}, {"r", e.r}};
  if (ctx.config.solver == SolverKind::grid)
    j["h"] = e.h;
  else
    j["nodes"] = e.nodes;
  return j;
}

Json artifact_metadata(const Context& ctx, const ScheduleEntry& e) {
  return Json{{"schema", "khessian.artifact/1"},
              {"config_hash", ctx.hash},
              {"seed", ctx.options.seed},
              {"order", {{"n", ctx.config.n}, {"k", ctx.config.k}}},
              {"constants", ctx.constants_json},
              {"entry", entry_json(ctx, e)}};
}

std::string metadata_line(const Json& meta) { return "# khessian " + meta.dump() + "\n"; }

// Header for run-level tables (summary, verify summary, gaps).
std::string run_metadata_line(const Context& ctx) {
  return metadata_line(Json{{"schema", "khessian.run/1"},
                            {"config_hash", ctx.hash},
                            {"seed", ctx.options.seed},
                            {"order", {{"n", ctx.config.n}, {"k", ctx.config.k}}},
                            {"constants", ctx.constants_json}});
}

// Writes through a temporary file so readers never see a partial artifact.
void write_atomically(const fs::path& path, const std::function<void(std::ostream&)>& body,
                      std::ios::openmode mode = std::ios::out) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, mode | std::ios::trunc);
    if (!out) throw ConfigurationError("cannot write " + tmp.string());
    body(out);
    if (!out) throw ConfigurationError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string stem(const ScheduleEntry& e) { return "entry_" + std::to_string(e.index); }

enum class Status { ok, config_error, nonconvergence };

struct Solved {
  ScheduleEntry entry;
  Status status = Status::ok;
  std::string message;
  std::string diagnostics;
  std::optional<RadialProfile> profile;
  std::optional<GridSolution> grid;
  double mesh = 0.0;
  int newton_iterations = 0;
  double residual_sup = 0.0;

  SolutionSamples samples(int k) const {
    return profile ? samples_from_profile(*profile, mesh) : samples_from_grid(grid->field, k);
  }
};

enum class Variant { main, other_start, half_epsilon };

ApproxConfig entry_config(const Context& ctx, const ScheduleEntry& e, double epsilon) {
  ApproxConfig ac;
  ac.epsilon = epsilon;
  ac.r = e.r;
  ac.newton_tol = ctx.config.newton_tol;
  ac.max_iter = ctx.config.max_iter;
  ac.validate(ctx.constants);
  Point z = Point::Zero(ctx.domain.real_dim());
  z(0) = e.r;
  ac.boundary_inner = ctx.sub.value(z);
  ac.boundary_outer = -1.0;
  return ac;
}

double radial_mesh(const Context& ctx, const ScheduleEntry& e) {
  const double R = std::get<Ball>(ctx.domain.shape).radius;
  return 2.0 * std::log(R / e.r) / (e.nodes - 1);
}

Solved solve_entry(const Context& ctx, const ScheduleEntry& e, Variant variant = Variant::main) {
  Solved s;
  s.entry = e;
  try {
    const ApproxConfig ac = entry_config(ctx, e, variant == Variant::half_epsilon ? 0.5 * e.epsilon : e.epsilon);
    switch (ctx.config.solver) {
      case SolverKind::radial: {
        if (variant == Variant::other_start) {
          const BarrierFunction sub = ctx.sub;
          const int m = ctx.domain.real_dim();
          s.profile = solve_radial_fd(ac, static_cast<const OperatorOrder&>(ctx.order), ctx.domain, e.nodes,
                                      [sub, m](double rho) {
                                        Point z = Point::Zero(m);
                                        z(0) = std::sqrt(rho);
                                        return sub.value(z);
                                      });
        } else {
          s.profile = solve_radial_fd(ac, ctx.order, ctx.domain, e.nodes);
        }
        s.mesh = radial_mesh(ctx, e);
        s.newton_iterations = s.profile->newton_iterations;
        break;
      }
      case SolverKind::radial_exact: {
        s.profile = solve_radial_exact(ac, ctx.order, ctx.domain).sample(e.nodes);
        s.profile->epsilon = ac.epsilon;
        s.mesh = 0.0;
        break;
      }
      case SolverKind::grid: {
        GridProblem pb;
        pb.order = ctx.order;
        pb.domain = ctx.domain;
        pb.r = ac.r;
        pb.epsilon = ac.epsilon;
        pb.epsilon_start = variant == Variant::other_start ? ac.epsilon : ctx.constants.epsilon1;
        pb.outer_value = ac.boundary_outer;
        const BarrierFunction sub = ctx.sub;
        pb.inner_data = [sub](const Point& z) { return sub.value(z); };
        pb.initial = pb.inner_data;
        pb.newton_tol = ac.newton_tol;
        pb.max_iter = ac.max_iter;
        s.grid = solve_grid(pb, e.h);
        s.mesh = e.h;
        s.newton_iterations = s.grid->stats.newton_iterations;
        s.residual_sup = s.grid->stats.residual_sup;
        break;
      }
    }
    if (s.profile) {
      s.residual_sup = 0.0;
      for (int i = 1; i + 1 < s.profile->size(); ++i)
        s.residual_sup = std::max(s.residual_sup, std::abs(s.profile->residual(i)));
    }
  } catch (const NonconvergenceError& ex) {
    s.status = Status::nonconvergence;
    s.message = ex.what();
    s.diagnostics = ex.diagnostics();
  } catch (const ConfigurationError& ex) {
    s.status = Status::config_error;
    s.message = ex.what();
  }
  return s;
}

template <class T>
std::vector<T> parallel_map(int count, int jobs, const std::function<T(int)>& fn) {
  std::vector<std::optional<T>> slots(count);
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min(jobs, count));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<T> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

void write_constants(const Context& ctx) {
  Json j{{"schema", "khessian.constants/1"},
         {"config_hash", ctx.hash},
         {"order", {{"n", ctx.config.n}, {"k", ctx.config.k}}},
         {"domain", ctx.domain.kind()},
         {"constants", ctx.constants_json}};
  write_atomically(ctx.out / "constants.json", [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

void write_solution(const Context& ctx, const Solved& s) {
  const Json meta = artifact_metadata(ctx, s.entry);
  if (s.status == Status::nonconvergence) {
    write_atomically(ctx.out / (stem(s.entry) + ".diagnostics.txt"), [&](std::ostream& o) {
      o << metadata_line(meta) << s.message << '\n' << s.diagnostics;
    });
    return;
  }
  if (s.status != Status::ok) return;
  if (s.profile) {
    write_atomically(ctx.out / (stem(s.entry) + ".csv"), [&](std::ostream& o) {
      o << metadata_line(meta);
      write_profile_csv(*s.profile, o);
    });
  } else {
    write_atomically(ctx.out / (stem(s.entry) + ".csv"), [&](std::ostream& o) {
      o << metadata_line(meta);
      write_grid_slice_csv(s.grid->field, o);
    });
    if (ctx.config.write_dump)
      write_atomically(
          ctx.out / (stem(s.entry) + ".bin"),
          [&](std::ostream& o) { write_grid_dump(s.grid->field, ctx.config.k, o, meta.dump()); },
          std::ios::out | std::ios::binary);
  }
}

std::string status_name(Status s) {
  switch (s) {
    case Status::ok: return "ok";
    case Status::config_error: return "config_error";
    case Status::nonconvergence: return "nonconvergence";
  }
  return "?";
}

void write_solve_summary(const Context& ctx, const std::vector<Solved>& solved) {
  write_atomically(ctx.out / "summary.csv", [&](std::ostream& o) {
    o << run_metadata_line(ctx);
    o << "index,solver,epsilon,r,nodes,h,status,newton_iterations,residual_sup\n";
    for (const auto& s : solved)
      o << s.entry.index << ',' << to_string(ctx.config.solver) << ',' << fmt(s.entry.epsilon) << ','
        << fmt(s.entry.r) << ',' << s.entry.nodes << ',' << fmt(s.entry.h) << ',' << status_name(s.status) << ','
        << s.newton_iterations << ',' << fmt(s.residual_sup) << '\n';
  });
}

// Solves every entry, writes the artifacts, and returns the exit code the failures imply.
int solve_all(const Context& ctx, std::vector<Solved>& solved, std::ostream& log, std::ostream& err) {
  solved = parallel_map<Solved>(static_cast<int>(ctx.entries.size()), ctx.options.jobs,
                                [&](int i) { return solve_entry(ctx, ctx.entries[i]); });
  write_constants(ctx);
  int code = kOk;
  for (const auto& s : solved) {
    write_solution(ctx, s);
    log << "entry " << s.entry.index << ": epsilon=" << fmt(s.entry.epsilon) << " r=" << fmt(s.entry.r);
    if (ctx.config.solver == SolverKind::grid)
      log << " h=" << fmt(s.entry.h);
    else
      log << " nodes=" << s.entry.nodes;
    log << " -> " << status_name(s.status) << " (newton " << s.newton_iterations << ")\n";
    if (s.status == Status::config_error) {
      err << "configuration error in entry " << s.entry.index << ": " << s.message << '\n';
      code = std::max(code, static_cast<int>(kConfigError));
    } else if (s.status == Status::nonconvergence) {
      err << "nonconvergence in entry " << s.entry.index << ": " << s.message << " (see " << stem(s.entry)
          << ".diagnostics.txt)\n";
      if (code == kOk) code = kNonconvergence;
    }
  }
  // A configuration error outranks nonconvergence: the schedule itself is wrong.
  return code;
}

// ---- loading prior artifacts ---------------------------------------------------------------------------

Json read_metadata_line(const std::string& line, const std::string& path) {
  const std::string tag = "# khessian ";
  if (line.rfind(tag, 0) != 0) throw ValidationError(path + ": missing '# khessian' metadata line");
  try {
    return Json::parse(line.substr(tag.size()));
  } catch (const std::exception&) {
    throw ValidationError(path + ": unreadable metadata line");
  }
}

ScheduleEntry entry_from_metadata(const Json& meta, const Context& ctx, const std::string& path) {
  try {
    const Json& e = meta.at("entry");
    if (e.at("solver").get<std::string>() != to_string(ctx.config.solver))
      throw ValidationError(path + ": artifact was produced by solver " + e.at("solver").get<std::string>());
    if (meta.at("order").at("n").get<int>() != ctx.config.n || meta.at("order").at("k").get<int>() != ctx.config.k)
      throw ValidationError(path + ": artifact order differs from the config");
    if (meta.at("constants") != ctx.constants_json)
      throw ValidationError(path + ": artifact barrier constants differ from the config (another domain?)");
    ScheduleEntry s;
    s.index = e.at("index").get<int>();
    s.epsilon = e.at("epsilon").get<double>();
    s.r = e.at("r").get<double>();
    if (e.contains("nodes")) s.nodes = e.at("nodes").get<int>();
    if (e.contains("h")) s.h = e.at("h").get<double>();
    return s;
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(path + ": incomplete metadata");
  }
}

Solved load_solution(const Context& ctx, const std::string& path) {
  Solved s;
  if (path.size() > 4 && path.substr(path.size() - 4) == ".bin") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigurationError("cannot open " + path);
    const GridDump dump = read_grid_dump(in);
    if (dump.metadata.empty()) throw ValidationError(path + ": dump carries no metadata trailer");
    Json meta;
    try {
      meta = Json::parse(dump.metadata);
    } catch (const std::exception&) {
      throw ValidationError(path + ": unreadable metadata trailer");
    }
    s.entry = entry_from_metadata(meta, ctx, path);
    const BarrierFunction sub = ctx.sub;
    GridField field(ctx.domain, s.entry.r, s.entry.h, -1.0, [sub](const Point& z) { return sub.value(z); });
    load_grid_dump(dump, field);
    s.grid = GridSolution{std::move(field), {}};
    s.mesh = s.entry.h;
    s.residual_sup = grid_residual(s.grid->field, ctx.order, s.entry.epsilon).sup;
  } else {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot open " + path);
    std::string first;
    std::getline(in, first);
    s.entry = entry_from_metadata(read_metadata_line(first, path), ctx, path);
    s.profile = read_profile_csv(in, ctx.config.n, ctx.config.k);
    s.profile->epsilon = s.entry.epsilon;
    s.mesh = ctx.config.solver == SolverKind::radial_exact ? 0.0 : radial_mesh(ctx, s.entry);
  }
  return s;
}

// ---- checks ----------------------------------------------------------------------------------------------

struct CheckOutcome {
  std::string name;
  double value = kNaN;
  double tolerance = kNaN;
  bool asserted = true;
  bool pass = true;
  std::string contract;
};

double max_abs_value(const SolutionSamples& u) {
  double m = 0.0;
  for (const auto& s : u.samples) m = std::max(m, std::abs(s.value));
  return m;
}

struct EntryVerification {
  ScheduleEntry entry;
  EstimateReport report;
  Json details;
  std::vector<CheckOutcome> checks;
  double H_boundary_max = kNaN;
};

EntryVerification verify_entry(const Context& ctx, const Solved& s, std::optional<Solved> half,
                               std::optional<Solved> other) {
  const RunConfig& cfg = ctx.config;
  const CheckSelection& sel = cfg.checks;
  const SolutionSamples u = s.samples(cfg.k);
  const double h2 = s.mesh * s.mesh;
  const double umax = max_abs_value(u);
  const bool exact = cfg.solver == SolverKind::radial_exact;
  const bool grid = cfg.solver == SolverKind::grid;
  EntryVerification v;
  v.entry = s.entry;
  v.report = estimate_report(u, ctx.domain, ctx.order, s.entry.epsilon, s.entry.r, ctx.options.seed);
  Json& d = v.details;

  if (sel.sandwich) {
    const SandwichResult sw = check_sandwich(u, ctx.domain, ctx.order);
    // Discretisation slack is local: ¼·mesh²·max(1, |u(z)|) at each sample.
    const BarrierFunction super = make_supersolution(ctx.domain, ctx.order);
    double excess = -std::numeric_limits<double>::infinity();
    for (const auto& p : u.samples) {
      const double viol = std::max(ctx.sub.value(p.z) - p.value, p.value - super.value(p.z));
      excess = std::max(excess, viol - 0.25 * h2 * std::max(1.0, std::abs(p.value)));
    }
    const double tol = cfg.tolerances.sandwich.value_or(1e-9);
    v.checks.push_back({"sandwich", excess, tol, true, excess <= tol,
                        "max(u_sub - u, u - u_super) - mesh^2 max(1, |u|) / 4 <= tol"});
    d["sandwich"] = {{"sub_slack", num(sw.sub_slack)}, {"lower_slack_w", num(sw.lower_slack)},
                     {"upper_slack", num(sw.upper_slack)}, {"excess_over_mesh_slack", num(excess)}};
  }
  if (!exact) {
    // Recomputed from the stored values, so edited artifacts cannot pass.
    double sup = 0.0;
    if (s.profile) {
      const Eigen::VectorXd res = radial_fd_residual(*s.profile, s.entry.epsilon);
      sup = res.cwiseAbs().maxCoeff();
    } else {
      sup = grid_residual(s.grid->field, ctx.order, s.entry.epsilon).sup;
    }
    const double tol = std::max(10.0 * cfg.newton_tol, 1e-8);
    v.checks.push_back({"pde_residual", sup, tol, true, sup <= tol, "scaled residual of H_k[u] = epsilon"});
  }
  if (sel.gradient) {
    const GradientBounds gb = check_gradient_bounds(u, ctx.order);
    v.checks.push_back({"gradient_C", gb.C_upper, kNaN, true, std::isfinite(gb.C_upper), "finite"});
    if (ctx.domain.starshaped)
      v.checks.push_back({"gradient_c0", gb.c0_lower, 0.0, true, gb.c0_lower > 0.0, "c0 > 0"});
    d["gradient"] = {{"C_upper", num(gb.C_upper)}, {"c0_lower", num(gb.c0_lower)}};
  }
  if (sel.hessian) {
    const double c = check_hessian_decay(u, ctx.order);
    v.checks.push_back({"hessian_decay", c, kNaN, true, std::isfinite(c), "finite"});
  }
  if (sel.P) {
    const double ratio = check_P_max_principle(u, ctx.order);
    const double tol = cfg.tolerances.P.value_or(exact ? 1e-8 : 1e-8 + 5.0 * h2);
    v.checks.push_back({"P_ratio", ratio, 1.0 + tol, true, ratio <= 1.0 + tol, "interior max P / boundary max P <= 1 + tol"});
  }
  if (sel.H) {
    const PQuantityParams params = PQuantityParams::standard(u, ctx.order, 1.0, ctx.options.seed);
    const HQuantityResult hq = check_H_quantity(u, ctx.order, params);
    v.H_boundary_max = hq.boundary_max;
    v.checks.push_back({"H_excess", hq.excess, kNaN, true, std::isfinite(hq.excess), "finite"});
    d["H"] = {{"excess", num(hq.excess)},         {"excess_eigen", num(hq.excess_eigen)},
              {"interior_max", num(hq.interior_max)}, {"boundary_max", num(hq.boundary_max)},
              {"M", num(params.M)},                {"sigma", num(params.sigma)}};
  }
  if (sel.G && ctx.domain.starshaped) {
    const GBarrierParams g = GBarrierParams::measured(u, ctx.domain, ctx.order);
    d["G"] = {{"A", num(g.A)}, {"B", num(g.B)}, {"c1", num(g.c1)}, {"c2", num(g.c2)},
              {"epsilon2", num(g.epsilon2)}, {"r5", num(g.r5)}};
    if (s.entry.epsilon < g.epsilon2 && s.entry.r <= g.r5) {
      const GBarrierResult gr = check_G_barrier(u, ctx.domain, ctx.order, g, s.entry.epsilon, s.entry.r);
      v.checks.push_back({"G_min", gr.G_min, 0.0, true, gr.G_min > 0.0 && gr.attained_on_boundary,
                          "G_min > 0, attained on the boundary"});
      d["G"]["G_min_boundary"] = num(gr.G_min_boundary);
      d["G"]["G_min_interior"] = num(gr.G_min_interior);
    } else {
      v.checks.push_back({"G_min", kNaN, 0.0, false, true, "not asserted: epsilon >= epsilon2 or r > r5"});
    }
  }
  if (sel.comparison && half) {
    if (half->status != Status::ok) {
      v.checks.push_back({"comparison", kNaN, kNaN, true, false, "second solve failed: " + half->message});
    } else {
      // Same data, smaller ε: the solution can only move up.
      const SolutionSamples w = half->samples(cfg.k);
      double viol = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < u.samples.size() && i < w.samples.size(); ++i)
        viol = std::max(viol, u.samples[i].value - w.samples[i].value);
      const double tol = exact ? 1e-10 : (grid ? 2.0 * h2 * umax : 1e-9);
      v.report.comparison_violation = std::max(viol, 0.0);
      v.checks.push_back({"comparison", viol, tol, true, viol <= tol, "u(epsilon) <= u(epsilon/2) nodewise"});
    }
  }
  if (sel.uniqueness && other) {
    if (other->status != Status::ok) {
      v.checks.push_back({"uniqueness", kNaN, kNaN, true, false, "second solve failed: " + other->message});
    } else {
      const double gap = check_uniqueness_scaling(u, other->samples(cfg.k), cfg.compact_r0);
      const double tol = 2.0 * cfg.newton_tol + 0.01 * h2 * umax;
      v.checks.push_back({"uniqueness", gap, tol, true, gap <= tol, "two initialisations agree on K"});
    }
  }
  return v;
}

double relative_spread(const std::vector<double>& xs, double floor = 0.0) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double x : xs) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const double scale = std::max({std::abs(lo), std::abs(hi), floor});
  return scale > 0.0 ? (hi - lo) / scale : 0.0;
}

std::vector<CheckOutcome> stability_checks(const Context& ctx, const std::vector<EntryVerification>& vs) {
  std::vector<CheckOutcome> out;
  if (vs.size() < 2) return out;
  const CheckSelection& sel = ctx.config.checks;
  const double tol = ctx.config.tolerances.stability;
  auto collect = [&](auto getter) {
    std::vector<double> xs;
    for (const auto& v : vs) xs.push_back(getter(v));
    return xs;
  };
  if (sel.gradient) {
    const double sC = relative_spread(collect([](const EntryVerification& v) { return v.report.grad_decay_C; }));
    out.push_back({"stability_gradient_C", sC, tol, true, sC <= tol, "relative spread across entries"});
    if (ctx.domain.starshaped) {
      const double s0 = relative_spread(collect([](const EntryVerification& v) { return v.report.grad_lower_c0; }));
      out.push_back({"stability_c0", s0, tol, true, s0 <= tol, "relative spread across entries"});
    }
  }
  if (sel.hessian) {
    const double sH = relative_spread(collect([](const EntryVerification& v) { return v.report.hessian_decay_C; }));
    out.push_back({"stability_hessian_decay", sH, tol, true, sH <= tol, "relative spread across entries"});
  }
  if (sel.H) {
    // H excess is often near 0, so its spread is measured against the boundary maximum of H.
    double floor = 0.0;
    for (const auto& v : vs) floor = std::max(floor, std::abs(v.H_boundary_max));
    const double sX = relative_spread(collect([](const EntryVerification& v) { return v.report.H_excess; }), floor);
    const double tH = ctx.config.tolerances.H_stability;
    out.push_back({"stability_H_excess", sX, tH, true, sX <= tH, "spread relative to max boundary H"});
  }
  return out;
}

Json checks_json(const std::vector<CheckOutcome>& checks) {
  Json a = Json::array();
  for (const auto& c : checks)
    a.push_back({{"name", c.name},
                 {"value", num(c.value)},
                 {"tolerance", num(c.tolerance)},
                 {"asserted", c.asserted},
                 {"pass", c.pass},
                 {"contract", c.contract}});
  return a;
}

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigurationError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kConfigError;
  } catch (const DomainError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const PreconditionError& e) {
    err << "check precondition failed: " << e.what() << '\n';
    return kFailedChecks;
  } catch (const NonconvergenceError& e) {
    err << "nonconvergence: " << e.what() << '\n' << e.diagnostics();
    return kNonconvergence;
  } catch (const fs::filesystem_error& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace

int cmd_solve(const RunConfig& config, const Options& options, std::ostream& log, std::ostream& err) {
  return guarded(
      [&] {
        const Context ctx = prepare(config, options, log);
        std::vector<Solved> solved;
        const int code = solve_all(ctx, solved, log, err);
        write_solve_summary(ctx, solved);
        return code;
      },
      err);
}

int cmd_verify(const RunConfig& config, const Options& options, std::ostream& log, std::ostream& err) {
  return guarded(
      [&] {
        if (config.checks.G_explicit && !config.domain.starshaped)
          throw ConfigurationError("check G requires a starshaped domain (domain.starshaped = false)");
        const Context ctx = prepare(config, options, log);
        const CheckSelection& sel = config.checks;
        std::vector<Solved> solved;
        if (!config.verify_solution.empty()) {
          for (const auto& path : config.verify_solution) solved.push_back(load_solution(ctx, path));
          write_constants(ctx);
        } else {
          const int code = solve_all(ctx, solved, log, err);
          write_solve_summary(ctx, solved);
          if (code != kOk) return code;
        }
        const int count = static_cast<int>(solved.size());
        std::vector<std::optional<Solved>> halves(count), others(count);
        if (sel.comparison)
          halves = parallel_map<std::optional<Solved>>(count, options.jobs, [&](int i) {
            return std::optional<Solved>(solve_entry(ctx, solved[i].entry, Variant::half_epsilon));
          });
        if (sel.uniqueness && config.solver != SolverKind::radial_exact)
          others = parallel_map<std::optional<Solved>>(count, options.jobs, [&](int i) {
            return std::optional<Solved>(solve_entry(ctx, solved[i].entry, Variant::other_start));
          });

        std::vector<EntryVerification> results;
        for (int i = 0; i < count; ++i) results.push_back(verify_entry(ctx, solved[i], halves[i], others[i]));
        const std::vector<CheckOutcome> stability = stability_checks(ctx, results);

        std::vector<std::string> failures;
        for (const auto& v : results) {
          Json j{{"schema", "khessian.verify_report/1"},
                 {"config_hash", ctx.hash},
                 {"seed", options.seed},
                 {"constants", ctx.constants_json},
                 {"entry", entry_json(ctx, v.entry)},
                 {"estimates", Json::parse(v.report.json())},
                 {"details", v.details},
                 {"checks", checks_json(v.checks)}};
          write_atomically(ctx.out / ("report_" + std::to_string(v.entry.index) + ".json"),
                           [&](std::ostream& o) { o << j.dump(2) << '\n'; });
          for (const auto& c : v.checks)
            if (c.asserted && !c.pass)
              failures.push_back("entry " + std::to_string(v.entry.index) + " " + c.name + ": value " + fmt(c.value) +
                                 " tolerance " + fmt(c.tolerance) + " (" + c.contract + ")");
        }
        for (const auto& c : stability)
          if (!c.pass)
            failures.push_back("run " + c.name + ": value " + fmt(c.value) + " tolerance " + fmt(c.tolerance));

        write_atomically(ctx.out / "verify_summary.csv", [&](std::ostream& o) {
          o << run_metadata_line(ctx);
          o << "index,epsilon,r,mesh,check,value,tolerance,asserted,pass\n";
          auto row = [&](const std::string& index, double eps, double r, double mesh, const CheckOutcome& c) {
            o << index << ',' << fmt(eps) << ',' << fmt(r) << ',' << fmt(mesh) << ',' << c.name << ',' << fmt(c.value)
              << ',' << fmt(c.tolerance) << ',' << (c.asserted ? 1 : 0) << ',' << (c.pass ? 1 : 0) << '\n';
          };
          for (std::size_t i = 0; i < results.size(); ++i)
            for (const auto& c : results[i].checks)
              row(std::to_string(results[i].entry.index), results[i].entry.epsilon, results[i].entry.r,
                  solved[i].mesh, c);
          for (const auto& c : stability) row("all", kNaN, kNaN, kNaN, c);
        });
        log << "verify: " << results.size() << " entries, " << failures.size() << " failed checks\n";
        if (!failures.empty()) {
          err << "failed checks:\n";
          for (const auto& f : failures) err << "  " << f << '\n';
          return static_cast<int>(kFailedChecks);
        }
        return static_cast<int>(kOk);
      },
      err);
}

int cmd_convergence(const RunConfig& config, const Options& options, std::ostream& log, std::ostream& err) {
  return guarded(
      [&] {
        if (config.mode != ScheduleMode::geometric || config.levels < 3)
          throw ConfigurationError("convergence needs a geometric schedule with at least 3 levels (schedule.levels)");
        const Context ctx = prepare(config, options, log);
        std::vector<Solved> solved;
        const int code = solve_all(ctx, solved, log, err);
        write_solve_summary(ctx, solved);
        if (code != kOk) return code;

        CauchyGaps gaps;
        const auto* ball = std::get_if<Ball>(&ctx.domain.shape);
        if (config.solver == SolverKind::grid) {
          std::vector<const GridField*> fields;
          for (const auto& s : solved) fields.push_back(&s.grid->field);
          gaps = grid_cauchy_study(fields, ctx.order, config.compact_r0,
                                   ball ? std::optional<double>(ball->radius) : std::nullopt);
        } else {
          std::vector<RadialProfile> profiles;
          for (const auto& s : solved) profiles.push_back(*s.profile);
          gaps = cauchy_convergence_study(profiles, ctx.order, config.compact_r0, ball->radius, config.compare_nodes);
        }
        const bool ok = gaps.decreasing(config.tolerances.cauchy_slack);
        write_atomically(ctx.out / "gaps.csv", [&](std::ostream& o) {
          o << run_metadata_line(ctx);
          o << "level,epsilon,r,next_epsilon,next_r,c0_gap,c1_gap\n";
          for (std::size_t j = 0; j < gaps.c0.size(); ++j)
            o << j << ',' << fmt(solved[j].entry.epsilon) << ',' << fmt(solved[j].entry.r) << ','
              << fmt(solved[j + 1].entry.epsilon) << ',' << fmt(solved[j + 1].entry.r) << ',' << fmt(gaps.c0[j]) << ','
              << fmt(gaps.c1[j]) << '\n';
          o << "limit," << fmt(solved.back().entry.epsilon) << ',' << fmt(solved.back().entry.r) << ",0,0,"
            << fmt(gaps.limit_c0) << ',' << fmt(gaps.limit_c1) << '\n';
        });
        log << "convergence: gaps";
        for (std::size_t j = 0; j < gaps.c0.size(); ++j) log << ' ' << fmt(gaps.c0[j]) << '/' << fmt(gaps.c1[j]);
        log << "; limit " << fmt(gaps.limit_c0) << '/' << fmt(gaps.limit_c1) << (ok ? " decreasing" : " NOT decreasing")
            << '\n';
        if (!ok) {
          err << "failed checks:\n  Cauchy gaps are not decreasing within slack " << fmt(config.tolerances.cauchy_slack)
              << '\n';
          return static_cast<int>(kFailedChecks);
        }
        return static_cast<int>(kOk);
      },
      err);
}

int run(int argc, char** argv) {
  CLI::App app{"Numerical study of the complex k-Hessian equation with a pole"};
  app.require_subcommand(1);
  std::string config_path;
  Options options;
  for (const char* name : {"solve", "verify", "convergence"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "run-config file")->required();
    sub->add_option("--out", options.out_dir, "output directory (overrides output.dir)");
    sub->add_option("--jobs", options.jobs, "parallel worker slots")->check(CLI::PositiveNumber);
    sub->add_option("--seed", options.seed, "seed for sampled directions");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  RunConfig config;
  try {
    config = load_run_config(config_path);
  } catch (const ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  }
  if (cmd == "solve") return cmd_solve(config, options, std::cout, std::cerr);
  if (cmd == "verify") return cmd_verify(config, options, std::cout, std::cerr);
  return cmd_convergence(config, options, std::cout, std::cerr);
}

}  // namespace khess::cli
