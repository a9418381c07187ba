#include "feasreg/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "feasreg/feasibility.hpp"

namespace feasreg {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "system", "seed", "t_max", "jobs", "out",
      "region.kind",
      "constraint.family", "constraint.n", "constraint.terminal",
      "constraint.k", "constraint.alpha",
      "constraint.si.sigma", "constraint.si.d_min", "constraint.si.n", "constraint.si.k",
      "constraint.si.eta",
      "constraint.source", "constraint.field_file", "constraint.mode", "constraint.gamma",
      "controller.type", "controller.horizon", "controller.gamma", "controller.checkpoint",
      "solver.restarts", "solver.lattice_levels", "solver.beam_width", "solver.outer_rounds",
      "solver.penalty_init", "solver.penalty_mult", "solver.max_inner_iters", "solver.feas_tol",
      "grid.lo", "grid.hi", "grid.res",
      "slice.v0", "slice.theta0",
      "hull.lo", "hull.hi",
      "train.lr", "train.batch", "train.iterations", "train.checkpoints", "train.hidden",
      "train.gamma", "train.field_gamma", "train.target_sync", "train.learned_field",
      "simulate.steps", "simulate.starts",
      "fixedpoint.tol", "fixedpoint.max_iters", "fixedpoint.gamma", "fixedpoint.family",
      "fixedpoint.policy",
      "verify.suite",
      "plot.region", "plot.trajectories", "plot.output",
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

ScenarioConfig ScenarioConfig::from_string(const std::string& text) {
  ScenarioConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (!known_keys().count(key))
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (cfg.kv.count(key))
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    if (val.empty()) continue;  // an empty value means "leave unset"
    cfg.kv[key] = val;
  }
  return cfg;
}

ScenarioConfig ScenarioConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

std::string ScenarioConfig::get_str(const std::string& key, const std::string& def) const {
  auto it = kv.find(key);
  return it == kv.end() ? def : it->second;
}
double ScenarioConfig::get_num(const std::string& key, double def) const {
  auto it = kv.find(key);
  if (it == kv.end()) return def;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a number: '" + it->second + "'");
  }
}
long ScenarioConfig::get_int(const std::string& key, long def) const {
  const double v = get_num(key, static_cast<double>(def));
  if (std::abs(v - std::llround(v)) > 1e-9)
    throw ConfigError("config key '" + key + "': expected an integer");
  return std::llround(v);
}
bool ScenarioConfig::get_bool(const std::string& key, bool def) const {
  auto it = kv.find(key);
  if (it == kv.end()) return def;
  const std::string& v = it->second;
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected on/off, got '" + v + "'");
}
std::vector<double> ScenarioConfig::get_nums(const std::string& key,
                                             const std::vector<double>& def) const {
  auto it = kv.find(key);
  if (it == kv.end()) return def;
  std::vector<double> out;
  std::istringstream ss(it->second);
  std::string tok;
  while (ss >> tok) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': bad number '" + tok + "'");
    }
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

SystemSpec ScenarioConfig::system() const {
  const std::string name = get_str("system", "braking");
  if (name == "braking") return braking_spec();
  if (name == "unicycle") return unicycle_spec();
  throw ConfigError("system must be braking or unicycle, got '" + name + "'");
}

StateGrid ScenarioConfig::grid() const {
  const std::string name = get_str("system", "braking");
  std::vector<double> lo, hi, res;
  if (name == "braking") {
    lo = get_nums("grid.lo", {0.0, 0.0});
    hi = get_nums("grid.hi", {10.0, 10.0});
    res = get_nums("grid.res", {0.1, 0.1});
  } else {
    lo = get_nums("grid.lo", {-3.0, -3.0});
    hi = get_nums("grid.hi", {3.0, 3.0});
    res = get_nums("grid.res", {0.05, 0.05});
  }
  return StateGrid::make(lo, hi, res);
}

StateGrid ScenarioConfig::hull() const {
  const std::string name = get_str("system", "braking");
  if (name == "braking") {
    auto lo = get_nums("hull.lo", {0.0, 0.0});
    auto hi = get_nums("hull.hi", {10.0, 10.0});
    return StateGrid::make(lo, hi, {(hi[0] - lo[0]) / 100.0, (hi[1] - lo[1]) / 100.0});
  }
  auto lo = get_nums("hull.lo", {-3.0, -3.0, 0.0, -3.14159265358979323846});
  auto hi = get_nums("hull.hi", {3.0, 3.0, 2.0, 3.14159265358979323846});
  std::vector<double> res;
  for (std::size_t i = 0; i < lo.size(); ++i) res.push_back((hi[i] - lo[i]) / 20.0);
  return StateGrid::make(lo, hi, res);
}

State ScenarioConfig::lift_slice(const SystemSpec& spec, double c0, double c1) const {
  if (spec.kind == SystemKind::Braking) {
    State x = State::zeros(2);
    x[0] = c0;
    x[1] = c1;
    return x;
  }
  State x = State::zeros(4);
  x[0] = c0;
  x[1] = c1;
  x[2] = get_num("slice.v0", 1.0);
  x[3] = get_num("slice.theta0", 1.5707963267948966);
  return x;
}

VirtualTimeConstraint ScenarioConfig::constraint(const SystemSpec& spec) const {
  const std::string fam = get_str("constraint.family", "hjr");
  if (fam == "pointwise") {
    long n = get_int("constraint.n", 10);
    if (!get_bool("constraint.terminal", true)) n -= 1;
    if (n < 0) throw ConfigError("pointwise: n must be >= 0 (after terminal=off)");
    return make_pointwise(static_cast<int>(n));
  }
  if (fam == "cbf") {
    const double k = get_num("constraint.k", spec.kind == SystemKind::Braking ? 0.05 : 0.2);
    const double alpha = get_num("constraint.alpha", 0.1);
    if (k <= 0) throw ConfigError("cbf: k must be > 0");
    FieldPtr B = spec.kind == SystemKind::Braking ? cbf_braking(k) : cbf_unicycle(k);
    return make_cbf_constraint(B, alpha);
  }
  if (fam == "si") {
    if (spec.kind != SystemKind::Braking) throw ConfigError("si: braking only");
    SiParams p;
    p.sigma = get_num("constraint.si.sigma", 0.12);
    p.d_min = get_num("constraint.si.d_min", 0.0);
    p.n_exp = get_num("constraint.si.n", 0.5);
    p.k = get_num("constraint.si.k", 0.23);
    p.eta = get_num("constraint.si.eta", 0.0);
    return make_si_constraint(p);
  }
  if (fam == "hjr" || fam == "cvf" || fam == "cdf") {
    const ConstraintFamily family = fam == "hjr"   ? ConstraintFamily::HJR
                                    : fam == "cvf" ? ConstraintFamily::CVF
                                                   : ConstraintFamily::CDF;
    const FieldMode mode =
        get_str("constraint.mode", "two_step") == "first_step" ? FieldMode::FirstStep
                                                               : FieldMode::TwoStep;
    const std::string source = get_str("constraint.source", "analytic");
    FieldPtr F;
    if (source == "analytic") {
      if (fam != "hjr" || spec.kind != SystemKind::Braking)
        throw ConfigError("constraint.source=analytic is only available for braking hjr");
      F = hjr_braking_analytic(spec.action_lower[0]);
    } else if (source == "tabular") {
      const std::string file = get_str("constraint.field_file", "");
      if (!file.empty()) {
        F = TabularField::load_csv(file);
      } else {
        BackupRule rule;
        rule.family = fam == "hjr"   ? BackupFamily::HJRDiscounted
                      : fam == "cvf" ? BackupFamily::CVF
                                     : BackupFamily::CDF;
        rule.gamma = get_num("constraint.gamma", 0.99);
        if (get_str("fixedpoint.policy", "optimal") == "best_effort")
          rule.policy = best_effort_policy();
        // extend below d = 0 so the violating set is representable
        const StateGrid field_grid = spec.kind == SystemKind::Braking
                                         ? extended_braking_grid(grid())
                                         : grid();
        auto fp = fixed_point_solve(spec, rule, field_grid, get_num("fixedpoint.tol", 1e-6),
                                    static_cast<std::size_t>(get_int("fixedpoint.max_iters", 5000)),
                                    jobs());
        F = fp.field;
      }
    } else if (source == "learned") {
      const std::string file = get_str("constraint.field_file", "");
      if (file.empty())
        throw ConfigError("constraint.source=learned needs constraint.field_file (checkpoint)");
      Checkpoint c = load_checkpoint(file);
      if (c.extra.empty()) throw ConfigError("checkpoint has no field net: " + file);
      F = mlp_field(c.extra[0]);
    } else {
      throw ConfigError("constraint.source must be analytic, tabular or learned");
    }
    return make_field_constraint(F, mode, family);
  }
  throw ConfigError("unknown constraint.family '" + fam + "'");
}

SolverParams ScenarioConfig::solver_params() const {
  SolverParams p;
  p.restarts = static_cast<int>(get_int("solver.restarts", 4));
  p.lattice_levels = static_cast<int>(get_int("solver.lattice_levels", 5));
  p.beam_width = static_cast<int>(get_int("solver.beam_width", 32));
  p.outer_rounds = static_cast<int>(get_int("solver.outer_rounds", 6));
  p.penalty_init = get_num("solver.penalty_init", 10.0);
  p.penalty_mult = get_num("solver.penalty_mult", 10.0);
  p.max_inner_iters = static_cast<int>(get_int("solver.max_inner_iters", 80));
  p.feas_tol = get_num("solver.feas_tol", 1e-6);
  p.seed = seed();
  if (p.restarts < 0 || p.lattice_levels < 2 || p.outer_rounds < 1 || p.feas_tol <= 0)
    throw ConfigError("solver parameters out of range");
  return p;
}

TrainerConfig ScenarioConfig::trainer_config() const {
  TrainerConfig t;
  t.lr = get_num("train.lr", 1e-4);
  t.batch = static_cast<int>(get_int("train.batch", 256));
  t.iterations = get_int("train.iterations", 10000);
  auto cps = get_nums("train.checkpoints", {10, 100, 1000, 10000});
  t.checkpoint_iters.clear();
  for (double c : cps) t.checkpoint_iters.push_back(static_cast<long>(c));
  t.seed = seed();
  t.gamma = get_num("train.gamma", 0.99);
  t.hidden = static_cast<int>(get_int("train.hidden", 64));
  t.target_sync = static_cast<int>(get_int("train.target_sync", 100));
  t.field_gamma = get_num("train.field_gamma", 0.99);
  t.learned_field = get_bool("train.learned_field", false);
  if (t.lr <= 0 || t.batch < 1 || t.iterations < 0 || t.gamma <= 0 || t.gamma >= 1)
    throw ConfigError("train parameters out of range");
  return t;
}

Policy ScenarioConfig::controller(const SystemSpec& spec, const VirtualTimeConstraint& g) const {
  const std::string type = get_str("controller.type", "mpc");
  if (type == "zero") return zero_policy();
  if (type == "best_effort") return best_effort_policy();
  if (type == "mpc") {
    OcpSpec p;
    p.spec = spec;
    p.N = static_cast<int>(get_int("controller.horizon", 10));
    p.gamma_obj = get_num("controller.gamma", 1.0);
    p.g = g;
    if (p.N < 1 || p.N > 16) throw ConfigError("controller.horizon out of range [1,16]");
    return mpc_policy(p, solver_params());
  }
  if (type == "rl") {
    const std::string file = get_str("controller.checkpoint", "");
    if (file.empty()) throw ConfigError("controller.type=rl needs controller.checkpoint");
    Checkpoint c = load_checkpoint(file);
    return mlp_policy(spec, c.policy, "rl@" + std::to_string(c.iteration));
  }
  throw ConfigError("controller.type must be mpc, rl, best_effort or zero");
}

std::vector<State> ScenarioConfig::starts(const SystemSpec& spec) const {
  std::vector<State> out;
  const std::string raw = get_str("simulate.starts", "");
  if (!raw.empty()) {
    std::istringstream ss(raw);
    std::string tuple;
    while (std::getline(ss, tuple, ';')) {
      tuple = trim(tuple);
      if (tuple.empty()) continue;
      std::istringstream ts(tuple);
      std::string num;
      State x = State::zeros(spec.state_dim);
      int d = 0;
      while (std::getline(ts, num, ',')) {
        if (d >= spec.state_dim) throw ConfigError("simulate.starts: too many components");
        x[d++] = std::stod(trim(num));
      }
      if (d == 2 && spec.state_dim == 4) x = lift_slice(spec, x[0], x[1]);
      else if (d != spec.state_dim)
        throw ConfigError("simulate.starts: wrong component count");
      out.push_back(x);
    }
    return out;
  }
  // documented default start sets (inside the feasible interior)
  if (spec.kind == SystemKind::Braking) {
    const double pts[6][2] = {{3, 2}, {5, 4}, {7, 6}, {9, 8}, {10, 5}, {8, 3}};
    for (auto& p : pts) out.push_back(State{p[0], p[1]});
  } else {
    const double ang[6] = {-2.356, -1.571, -0.785, 0.785, 2.356, 3.141};
    for (double a : ang) out.push_back(lift_slice(spec, 2.0 * std::cos(a), 2.0 * std::sin(a)));
  }
  return out;
}

std::string ScenarioConfig::defaults_text() {
  return R"(# feasreg scenario defaults (every recognized key with its default)
system = braking            # braking | unicycle
seed = 0
t_max = 500                 # endless-labeling / CA rollout horizon (states)
jobs = 1
out = out

region.kind = policy        # policy | state | max_efr | max_efr_discrete

constraint.family = hjr     # pointwise | cbf | si | hjr | cvf | cdf
constraint.n = 10           # pointwise horizon
constraint.terminal = on    # pointwise: include the i = n residual
constraint.k = 0.05         # cbf coefficient (braking default; unicycle default 0.2)
constraint.alpha = 0.1      # cbf decrease rate
constraint.si.sigma = 0.12
constraint.si.d_min = 0
constraint.si.n = 0.5
constraint.si.k = 0.23
constraint.si.eta = 0
constraint.source = analytic  # analytic | tabular | learned (field families)
constraint.field_file =       # tabular/learned field input
constraint.mode = two_step    # first_step | two_step
constraint.gamma = 0.99       # cvf/cdf/hjr-discounted discount

controller.type = mpc       # mpc | rl | best_effort | zero
controller.horizon = 10
controller.gamma = 1.0
controller.checkpoint =     # rl checkpoint path

solver.restarts = 4
solver.lattice_levels = 5
solver.beam_width = 32
solver.outer_rounds = 6
solver.penalty_init = 10
solver.penalty_mult = 10
solver.max_inner_iters = 80
solver.feas_tol = 1e-6

grid.lo = 0 0               # braking default; unicycle slice default -3 -3
grid.hi = 10 10
grid.res = 0.1 0.1
slice.v0 = 1.0              # unicycle slice initial velocity
slice.theta0 = 1.5707963267948966
hull.lo =                   # training hull (defaults to grid for braking)
hull.hi =

train.lr = 1e-4
train.batch = 256
train.iterations = 10000
train.checkpoints = 10 100 1000 10000
train.hidden = 64
train.gamma = 0.99
train.field_gamma = 0.99
train.target_sync = 100
train.learned_field = off

simulate.steps = 300
simulate.starts =           # "d,v; d,v; ..." (braking) or "y,z; ..." (unicycle slice)

fixedpoint.tol = 1e-6
fixedpoint.max_iters = 5000
fixedpoint.gamma = 0.99
fixedpoint.family = hjr     # hjr | cvf | cdf
fixedpoint.policy = optimal # optimal | best_effort

verify.suite = all          # containment | monotonicity | equivalence | cis_invariance | ca_equivalence | all

plot.region =               # region CSV to draw
plot.trajectories =         # space-separated trajectory CSVs
plot.output = figure.svg
)";
}

}  // namespace feasreg
