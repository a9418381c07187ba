#include "feasreg/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "feasreg/io.hpp"
#include "feasreg/svg.hpp"
#include "feasreg/verify.hpp"

namespace feasreg {

using nlohmann::json;

void write_trajectory_csv(const std::string& path, const SystemSpec& spec,
                          const VirtualTimeConstraint& g, const Trajectory& traj) {
  std::ostringstream out;
  out << "# feasreg trajectory v1\n";
  out << "# system=" << spec.name << "\n";
  out << "# constraint=" << g.describe() << "\n";
  out << "step";
  for (int d = 0; d < spec.state_dim; ++d) out << ",x" << d;
  for (int a = 0; a < spec.action_dim; ++a) out << ",u" << a;
  out << ",h";
  for (int r = 0; r < g.num_residuals(); ++r) out << ",g" << r;
  out << ",violated\n";
  const int n = g.n;
  std::vector<double> resid(static_cast<size_t>(g.num_residuals()));
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    out << t;
    for (int d = 0; d < spec.state_dim; ++d) out << "," << fmt_g(traj.states[t][d]);
    for (int a = 0; a < spec.action_dim; ++a)
      out << "," << (t < traj.actions.size() ? fmt_g(traj.actions[t][a]) : std::string(""));
    out << "," << fmt_g(spec.h(traj.states[t]));
    // residuals of the virtual window rooted at t (real = virtual under the
    // executed policy); windows that run past the trajectory end are blank
    if (t + static_cast<size_t>(n) < traj.states.size()) {
      g.residuals(spec, std::span<const State>(traj.states.data() + t, static_cast<size_t>(n + 1)),
                  resid.data());
      for (double rv : resid) out << "," << fmt_g(rv);
    } else {
      for (int r = 0; r < g.num_residuals(); ++r) out << ",";
    }
    out << "," << (traj.violated_at && *traj.violated_at == t ? 1 : 0) << "\n";
  }
  write_file_atomic(path, out.str());
}

Trajectory read_trajectory_csv(const std::string& path, int state_dim) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open trajectory: " + path);
  Trajectory traj;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line.rfind("step", 0) == 0) continue;
    std::istringstream ss(line);
    std::string tok;
    std::vector<std::string> cols;
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
    if (static_cast<int>(cols.size()) < 1 + state_dim)
      throw ModelError(path + ": parse failure at line " + std::to_string(lineno));
    State x = State::zeros(state_dim);
    try {
      for (int d = 0; d < state_dim; ++d) x[d] = std::stod(cols[static_cast<size_t>(1 + d)]);
    } catch (const std::exception&) {
      throw ModelError(path + ": parse failure at line " + std::to_string(lineno));
    }
    traj.states.push_back(x);
    if (cols.back() == "1") traj.violated_at = traj.states.size() - 1;
  }
  return traj;
}

int cmd_simulate(const ScenarioConfig& cfg) {
  const SystemSpec spec = cfg.system();
  const VirtualTimeConstraint g = cfg.constraint(spec);
  const Policy pi = cfg.controller(spec, g);
  const auto starts = cfg.starts(spec);
  const std::size_t T = static_cast<std::size_t>(cfg.get_int("simulate.steps", 300));
  const std::string out = cfg.out_dir();
  int written = 0;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const Trajectory traj = rollout(spec, pi, starts[k], T);
    char name[64];
    std::snprintf(name, sizeof(name), "traj_%03zu.csv", k);
    write_trajectory_csv(out + "/" + name, spec, g, traj);
    std::cout << name << ": start=(";
    for (int d = 0; d < spec.state_dim; ++d)
      std::cout << fmt_g(starts[k][d]) << (d + 1 < spec.state_dim ? "," : ")");
    if (traj.violated_at)
      std::cout << " violated_at=" << *traj.violated_at;
    else
      std::cout << " violation-free";
    std::cout << "\n";
    ++written;
  }
  std::cout << written << " trajectories written to " << out << "\n";
  return 0;
}

int cmd_region(const ScenarioConfig& cfg) {
  const SystemSpec spec = cfg.system();
  const StateGrid grid = cfg.grid();
  const std::string kind = cfg.get_str("region.kind", "policy");
  RegionMap map;
  if (kind == "max_efr") {
    map = max_efr_braking(grid);
  } else if (kind == "max_efr_discrete") {
    map = max_efr_braking_discrete(grid);
  } else {
    const VirtualTimeConstraint g = cfg.constraint(spec);
    if (kind == "state") {
      if (spec.kind == SystemKind::Unicycle)
        throw ConfigError("region.kind=state: slice sweeps need full states; use kind=policy");
      map = label_state_region(spec, g, grid, cfg.solver_params(), cfg.jobs());
    } else if (kind == "policy") {
      const Policy pi = cfg.controller(spec, g);
      if (spec.kind == SystemKind::Braking) {
        map = label_policy_region(spec, g, pi, grid, cfg.t_max(), cfg.jobs());
      } else {
        map = label_policy_region_lifted(
            spec, g, pi, grid, cfg.t_max(),
            [&](const State& n2) { return cfg.lift_slice(spec, n2[0], n2[1]); }, cfg.jobs());
        map.metadata["slice"] = "v0=" + fmt_g(cfg.get_num("slice.v0", 1.0)) +
                                ",theta0=" + fmt_g(cfg.get_num("slice.theta0", 1.5707963267948966));
      }
    } else {
      throw ConfigError("region.kind must be policy, state, max_efr or max_efr_discrete");
    }
  }
  const std::string out = cfg.out_dir();
  map.save_csv(out + "/region.csv");
  const RegionStats st = region_stats(map);
  json j;
  j["total"] = st.total;
  j["infeasible"] = st.infeasible;
  j["initially_feasible"] = st.initially;
  j["endlessly_feasible"] = st.endless;
  j["frac_infeasible"] = st.frac_infeasible;
  j["frac_initially_feasible"] = st.frac_initially;
  j["frac_endlessly_feasible"] = st.frac_endless;
  j["metadata"] = map.metadata;
  write_file_atomic(out + "/stats.json", j.dump(2) + "\n");
  std::cout << "region: " << st.endless << " endlessly / " << st.initially << " initially / "
            << st.infeasible << " infeasible of " << st.total << " cells -> " << out << "\n";
  return 0;
}

int cmd_train(const ScenarioConfig& cfg) {
  const SystemSpec spec = cfg.system();
  const VirtualTimeConstraint g = cfg.constraint(spec);
  const TrainerConfig tc = cfg.trainer_config();
  const StateGrid hull = cfg.hull();
  const std::string out = cfg.out_dir();

  TrainResult tr;
  try {
    tr = train(tc, spec, g, hull);
  } catch (const TrainingDiverged& e) {
    std::cerr << e.what() << "\n";
    return 3;
  }

  json evo = json::array();
  for (const Checkpoint& c : tr.checkpoints) {
    char name[64];
    std::snprintf(name, sizeof(name), "checkpoint_%06ld.bin", c.iteration);
    save_checkpoint(c, out + "/" + name);
    const Policy pi = mlp_policy(spec, c.policy, "rl@" + std::to_string(c.iteration));
    RegionMap map;
    const StateGrid grid = cfg.grid();
    // with a learned field the checkpoint's own field defines the constraint swept
    const VirtualTimeConstraint gc =
        tc.learned_field && !c.extra.empty()
            ? make_field_constraint(mlp_field(c.extra[0]), FieldMode::TwoStep,
                                    ConstraintFamily::HJR)
            : g;
    if (spec.kind == SystemKind::Braking) {
      map = label_policy_region(spec, gc, pi, grid, cfg.t_max(), cfg.jobs());
    } else {
      map = label_policy_region_lifted(
          spec, gc, pi, grid, cfg.t_max(),
          [&](const State& n2) { return cfg.lift_slice(spec, n2[0], n2[1]); }, cfg.jobs());
    }
    char rname[64];
    std::snprintf(rname, sizeof(rname), "region_%06ld.csv", c.iteration);
    map.metadata["checkpoint"] = name;
    map.save_csv(out + "/" + rname);
    const RegionStats st = region_stats(map);
    json row;
    row["iteration"] = c.iteration;
    row["checkpoint"] = name;
    row["efr_cells"] = st.endless;
    row["ifr_cells"] = st.endless + st.initially;
    evo.push_back(row);
    std::cout << "iter " << c.iteration << ": EFR=" << st.endless
              << " IFR=" << st.endless + st.initially << "\n";
  }
  write_file_atomic(out + "/evolution.json", evo.dump(2) + "\n");
  return 0;
}

int cmd_verify(const ScenarioConfig& cfg) {
  MapRegistry reg(cfg.grid(), cfg.solver_params(), cfg.t_max(), cfg.jobs());
  const auto reports = run_suites(reg, cfg.get_str("verify.suite", "all"), cfg.seed());
  json out = json::array();
  bool all_pass = true;
  for (const auto& rep : reports) {
    json checks = json::array();
    for (const auto& c : rep.checks) {
      std::cout << (c.pass ? "PASS" : "FAIL") << "  [" << rep.suite << "] " << c.name << " ("
                << c.detail << ")\n";
      checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
      all_pass = all_pass && c.pass;
    }
    out.push_back({{"suite", rep.suite}, {"pass", rep.pass()}, {"checks", checks}});
  }
  write_file_atomic(cfg.out_dir() + "/verify.json", out.dump(2) + "\n");
  std::cout << (all_pass ? "ALL CHECKS PASSED" : "SOME CHECKS FAILED") << "\n";
  return all_pass ? 0 : 1;
}

int cmd_plot(const ScenarioConfig& cfg) {
  const std::string region_path = cfg.get_str("plot.region", "");
  if (region_path.empty()) throw ConfigError("plot.region is required");
  const RegionMap map = RegionMap::load_csv(region_path);
  std::vector<TrajectoryData> trajs;
  std::istringstream ss(cfg.get_str("plot.trajectories", ""));
  std::string tp;
  const bool braking = map.metadata.count("system") == 0 || map.metadata.at("system") == "braking";
  while (ss >> tp) {
    const Trajectory t = read_trajectory_csv(tp, braking ? 2 : 4);
    TrajectoryData td;
    td.violated_at = t.violated_at;
    for (const State& x : t.states) td.points.push_back({x[0], x[1]});
    trajs.push_back(std::move(td));
  }
  const std::string out = cfg.get_str("plot.output", cfg.out_dir() + "/figure.svg");
  std::string title = braking ? "braking feasible regions" : "unicycle slice feasible regions";
  if (map.metadata.count("constraint")) title += " - " + map.metadata.at("constraint");
  write_region_figure(out, map, trajs, title);
  std::cout << "figure written to " << out << "\n";
  return 0;
}

}  // namespace feasreg
