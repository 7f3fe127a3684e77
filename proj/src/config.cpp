#include "khessian/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "khessian/errors.hpp"

namespace khess {

namespace {

const std::set<std::string> kKnownKeys = {
    "order.n", "order.k",
    "domain.kind", "domain.radius", "domain.axes", "domain.r0", "domain.R0", "domain.tau0", "domain.C_Omega",
    "domain.mu0", "domain.starshaped", "domain.auto_configure", "domain.boundary_samples",
    "schedule.solver", "schedule.mode", "schedule.epsilon", "schedule.epsilon_fraction", "schedule.r",
    "schedule.r_fraction", "schedule.levels", "schedule.nodes", "schedule.h", "schedule.newton_tol",
    "schedule.max_iter",
    "checks.list", "checks.sandwich_tol", "checks.P_tol", "checks.stability", "checks.H_stability",
    "checks.cauchy_slack", "checks.compact_r0", "checks.compare_nodes",
    "output.dir", "output.dump",
    "verify.solution"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class KeyValues {
 public:
  explicit KeyValues(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  const std::string& text(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigurationError("missing field " + key);
    return it->second;
  }

  double number(const std::string& key) const { return to_number(key, text(key)); }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  int integer(const std::string& key) const { return to_integer(key, text(key)); }
  int integer(const std::string& key, int fallback) const { return has(key) ? integer(key) : fallback; }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = text(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigurationError(key + ": expected true or false, got '" + v + "'");
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    if (!has(key)) return out;
    for (const auto& item : split_list(text(key))) out.push_back(to_number(key, item));
    if (out.empty()) throw ConfigurationError(key + ": empty list");
    return out;
  }

  std::vector<int> integers(const std::string& key) const {
    std::vector<int> out;
    if (!has(key)) return out;
    for (const auto& item : split_list(text(key))) out.push_back(to_integer(key, item));
    if (out.empty()) throw ConfigurationError(key + ": empty list");
    return out;
  }

 private:
  static double to_number(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || v.empty()) throw ConfigurationError(key + ": not a number: '" + v + "'");
    return x;
  }

  static int to_integer(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long x = 0;
    try {
      x = std::stol(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || v.empty()) throw ConfigurationError(key + ": not an integer: '" + v + "'");
    return static_cast<int>(x);
  }

  std::map<std::string, std::string> kv_;
};

void require_positive(const std::string& key, double v) {
  if (!(v > 0.0)) throw ConfigurationError(key + " must be positive");
}

}  // namespace

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::radial: return "radial";
    case SolverKind::radial_exact: return "radial_exact";
    case SolverKind::grid: return "grid";
  }
  return "?";
}

CheckSelection CheckSelection::parse(const std::string& list) {
  CheckSelection c;
  c.sandwich = c.gradient = c.P = c.H = c.hessian = c.G = false;
  for (const auto& name : split_list(list)) {
    if (name == "all") {
      c.sandwich = c.gradient = c.P = c.H = c.hessian = c.G = c.comparison = c.uniqueness = true;
      c.G_explicit = true;
    } else if (name == "sandwich") {
      c.sandwich = true;
    } else if (name == "gradient") {
      c.gradient = true;
    } else if (name == "P") {
      c.P = true;
    } else if (name == "H") {
      c.H = true;
    } else if (name == "hessian") {
      c.hessian = true;
    } else if (name == "G") {
      c.G = c.G_explicit = true;
    } else if (name == "comparison") {
      c.comparison = true;
    } else if (name == "uniqueness") {
      c.uniqueness = true;
    } else {
      throw ConfigurationError("checks.list: unknown check '" + name + "'");
    }
  }
  return c;
}

std::string CheckSelection::list() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(sandwich, "sandwich");
  add(gradient, "gradient");
  add(P, "P");
  add(H, "H");
  add(hessian, "hessian");
  add(G, "G");
  add(comparison, "comparison");
  add(uniqueness, "uniqueness");
  return out;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunConfig::hash() const {
  std::string text;
  for (const auto& [key, value] : raw) text += key + "=" + value + "\n";
  return fnv1a_hex(text);
}

std::vector<ScheduleEntry> RunConfig::entries(const GlueConstants& constants) const {
  std::vector<ScheduleEntry> out;
  std::vector<int> mesh_nodes = nodes;
  std::vector<double> mesh_h = h;
  const bool grid = solver == SolverKind::grid;
  const std::size_t meshes = grid ? mesh_h.size() : mesh_nodes.size();

  if (mode == ScheduleMode::geometric) {
    if (meshes != 1) throw ConfigurationError("geometric schedule needs exactly one mesh (schedule.nodes or schedule.h)");
    for (int j = 0; j < levels; ++j) {
      ScheduleEntry e;
      e.index = j;
      e.epsilon = constants.epsilon1 * std::ldexp(1.0, -j);
      e.r = constants.r_max * std::ldexp(1.0, -j);
      if (grid)
        e.h = mesh_h[0];
      else
        e.nodes = mesh_nodes[0];
      out.push_back(e);
    }
  } else {
    std::vector<double> eps = epsilon;
    for (double f : epsilon_fraction) eps.push_back(f * constants.epsilon1);
    std::vector<double> radii = r;
    for (double f : r_fraction) radii.push_back(f * constants.r_max);
    int index = 0;
    for (double e : eps)
      for (double rr : radii)
        for (std::size_t m = 0; m < meshes; ++m) {
          ScheduleEntry s;
          s.index = index++;
          s.epsilon = e;
          s.r = rr;
          if (grid)
            s.h = mesh_h[m];
          else
            s.nodes = mesh_nodes[m];
          out.push_back(s);
        }
  }
  if (out.empty()) throw ConfigurationError("schedule is empty");
  return out;
}

RunConfig parse_run_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigurationError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!kKnownKeys.count(key)) throw ConfigurationError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (kv.count(key)) throw ConfigurationError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    // Lists are stored as "a, b, c" so that spacing does not change the hash.
    const auto items = split_list(value);
    std::string normal = value;
    if (value.find(',') != std::string::npos) {
      normal.clear();
      for (std::size_t i = 0; i < items.size(); ++i) normal += (i ? ", " : "") + items[i];
    }
    kv[key] = normal;
  }
  const KeyValues v(kv);
  RunConfig c;
  c.raw = kv;

  c.n = v.integer("order.n");
  c.k = v.integer("order.k");
  if (!(c.k >= 1 && c.k < c.n)) throw ConfigurationError("order: need 1 <= k < n (got n = " + std::to_string(c.n) +
                                                         ", k = " + std::to_string(c.k) + ")");

  const bool any_domain =
      std::any_of(kv.begin(), kv.end(), [](const auto& p) { return p.first.rfind("domain.", 0) == 0; });
  if (!any_domain) throw ConfigurationError("missing domain block (field domain.kind)");
  const std::string kind = v.text("domain.kind");
  DomainSpec& d = c.domain;
  d.n = c.n;
  if (kind == "ball") {
    d.shape = Ball{v.number("domain.radius")};
  } else if (kind == "ellipsoid") {
    const auto axes = v.numbers("domain.axes");
    if (axes.empty()) throw ConfigurationError("missing field domain.axes");
    if (static_cast<int>(axes.size()) != 2 * c.n)
      throw ConfigurationError("domain.axes: need 2n = " + std::to_string(2 * c.n) + " semi-axes");
    d.shape = Ellipsoid{Eigen::Map<const Eigen::VectorXd>(axes.data(), static_cast<Eigen::Index>(axes.size()))};
  } else {
    throw ConfigurationError("domain.kind: expected ball or ellipsoid, got '" + kind + "'");
  }
  d.r0 = v.number("domain.r0");
  d.R0 = v.number("domain.R0");
  d.tau0 = v.number("domain.tau0", d.tau0);
  d.C_Omega = v.number("domain.C_Omega", d.C_Omega);
  d.mu0 = v.number("domain.mu0", d.mu0);
  d.starshaped = v.flag("domain.starshaped", true);
  d.boundary_samples = v.integer("domain.boundary_samples", d.boundary_samples);
  c.auto_configure = v.flag("domain.auto_configure", false);

  const std::string solver = v.text("schedule.solver");
  if (solver == "radial")
    c.solver = SolverKind::radial;
  else if (solver == "radial_exact")
    c.solver = SolverKind::radial_exact;
  else if (solver == "grid")
    c.solver = SolverKind::grid;
  else
    throw ConfigurationError("schedule.solver: expected radial, radial_exact or grid, got '" + solver + "'");
  if (c.solver == SolverKind::grid && c.n != 2) throw ConfigurationError("schedule.solver = grid needs order.n = 2");
  if (c.solver != SolverKind::grid && kind != "ball")
    throw ConfigurationError("schedule.solver = " + solver + " needs domain.kind = ball");

  const std::string mode = v.has("schedule.mode") ? v.text("schedule.mode") : "product";
  if (mode == "product")
    c.mode = ScheduleMode::product;
  else if (mode == "geometric")
    c.mode = ScheduleMode::geometric;
  else
    throw ConfigurationError("schedule.mode: expected product or geometric, got '" + mode + "'");

  c.epsilon = v.numbers("schedule.epsilon");
  c.epsilon_fraction = v.numbers("schedule.epsilon_fraction");
  c.r = v.numbers("schedule.r");
  c.r_fraction = v.numbers("schedule.r_fraction");
  c.nodes = v.integers("schedule.nodes");
  c.h = v.numbers("schedule.h");
  if (c.mode == ScheduleMode::geometric) {
    c.levels = v.integer("schedule.levels");
    if (c.levels < 1) throw ConfigurationError("schedule.levels must be >= 1");
    if ((c.solver == SolverKind::grid ? v.numbers("schedule.h").size() : v.numbers("schedule.nodes").size()) > 1)
      throw ConfigurationError("geometric schedule needs exactly one mesh (schedule.nodes or schedule.h)");
    if (!c.epsilon.empty() || !c.epsilon_fraction.empty() || !c.r.empty() || !c.r_fraction.empty())
      throw ConfigurationError("geometric schedule derives epsilon and r; remove schedule.epsilon*/schedule.r*");
  } else {
    if (c.epsilon.empty() && c.epsilon_fraction.empty())
      throw ConfigurationError("missing field schedule.epsilon (or schedule.epsilon_fraction)");
    if (c.r.empty() && c.r_fraction.empty()) throw ConfigurationError("missing field schedule.r (or schedule.r_fraction)");
  }
  for (double e : c.epsilon) require_positive("schedule.epsilon", e);
  for (double e : c.epsilon_fraction) require_positive("schedule.epsilon_fraction", e);
  for (double e : c.r) require_positive("schedule.r", e);
  for (double e : c.r_fraction) require_positive("schedule.r_fraction", e);
  if (c.solver == SolverKind::grid) {
    if (c.h.empty()) throw ConfigurationError("missing field schedule.h");
    for (double e : c.h) require_positive("schedule.h", e);
  } else {
    if (c.nodes.empty()) throw ConfigurationError("missing field schedule.nodes");
    for (int m : c.nodes)
      if (m < 32) throw ConfigurationError("schedule.nodes must be >= 32");
  }
  c.newton_tol = v.number("schedule.newton_tol", c.newton_tol);
  require_positive("schedule.newton_tol", c.newton_tol);
  c.max_iter = v.integer("schedule.max_iter", c.max_iter);
  if (c.max_iter < 1) throw ConfigurationError("schedule.max_iter must be >= 1");

  if (v.has("checks.list")) c.checks = CheckSelection::parse(v.text("checks.list"));
  if (v.has("checks.sandwich_tol")) {
    c.tolerances.sandwich = v.number("checks.sandwich_tol");
    require_positive("checks.sandwich_tol", *c.tolerances.sandwich);
  }
  if (v.has("checks.P_tol")) {
    c.tolerances.P = v.number("checks.P_tol");
    require_positive("checks.P_tol", *c.tolerances.P);
  }
  c.tolerances.stability = v.number("checks.stability", c.tolerances.stability);
  c.tolerances.H_stability = v.number("checks.H_stability", c.tolerances.H_stability);
  c.tolerances.cauchy_slack = v.number("checks.cauchy_slack", c.tolerances.cauchy_slack);
  require_positive("checks.stability", c.tolerances.stability);
  require_positive("checks.H_stability", c.tolerances.H_stability);
  require_positive("checks.cauchy_slack", c.tolerances.cauchy_slack);
  c.compact_r0 = v.number("checks.compact_r0", d.r0);
  require_positive("checks.compact_r0", c.compact_r0);
  c.compare_nodes = v.integer("checks.compare_nodes", c.compare_nodes);
  if (c.compare_nodes < 2) throw ConfigurationError("checks.compare_nodes must be >= 2");

  if (v.has("output.dir")) c.output_dir = v.text("output.dir");
  c.write_dump = v.flag("output.dump", true);
  if (v.has("verify.solution")) c.verify_solution = split_list(v.text("verify.solution"));
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

}  // namespace khess
