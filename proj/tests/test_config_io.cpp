#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "feasreg/commands.hpp"
#include "feasreg/svg.hpp"
#include "feasreg/verify.hpp"

using namespace feasreg;

TEST_CASE("config parsing") {
  SUBCASE("dotted keys and comments") {
    const auto cfg = ScenarioConfig::from_string(
        "system = braking\n"
        "# comment line\n"
        "constraint.family = cbf   # trailing comment\n"
        "constraint.k = 0.05\n");
    CHECK(cfg.get_str("system", "") == "braking");
    CHECK(cfg.get_num("constraint.k", 0) == 0.05);
  }
  SUBCASE("unknown keys are rejected before any computation") {
    CHECK_THROWS_AS(ScenarioConfig::from_string("nonsense.key = 1\n"), ConfigError);
  }
  SUBCASE("duplicate keys are rejected") {
    CHECK_THROWS_AS(ScenarioConfig::from_string("seed = 1\nseed = 2\n"), ConfigError);
  }
  SUBCASE("out-of-range values are rejected") {
    const auto cfg = ScenarioConfig::from_string("train.lr = -1\n");
    CHECK_THROWS_AS(cfg.trainer_config(), ConfigError);
    const auto cfg2 = ScenarioConfig::from_string("controller.horizon = 99\n");
    const SystemSpec spec = cfg2.system();
    CHECK_THROWS_AS(cfg2.controller(spec, cfg2.constraint(spec)), ConfigError);
  }
  SUBCASE("bad numbers carry the key path") {
    const auto cfg = ScenarioConfig::from_string("constraint.k = abc\n");
    try {
      (void)cfg.constraint(cfg.system());
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("constraint.k") != std::string::npos);
    }
  }
  SUBCASE("the defaults text parses") {
    const auto cfg = ScenarioConfig::from_string(ScenarioConfig::defaults_text());
    CHECK(cfg.get_str("system", "") == "braking");
    CHECK(cfg.system().name == "braking");
    CHECK(cfg.grid().total() == 101 * 101);
  }
}

TEST_CASE("config builds every constraint family") {
  const SystemSpec bra = braking_spec();
  for (const std::string fam : {"pointwise", "cbf", "si", "hjr"}) {
    const auto cfg = ScenarioConfig::from_string("constraint.family = " + fam + "\n");
    const auto g = cfg.constraint(bra);
    CHECK(family_name(g.family) == fam);
  }
  // cvf/cdf default to the tabular fixed point; keep the grid tiny here
  for (const std::string fam : {"cvf", "cdf"}) {
    const auto cfg = ScenarioConfig::from_string("constraint.family = " + fam +
                                                 "\nconstraint.source = tabular\n"
                                                 "grid.res = 1 1\nfixedpoint.tol = 1e-3\n");
    const auto g = cfg.constraint(bra);
    CHECK(family_name(g.family) == fam);
    CHECK(g.field != nullptr);
  }
}

TEST_CASE("trajectory CSV writes residuals and the violation flag") {
  const SystemSpec bra = braking_spec();
  const auto g = make_pointwise(2);
  const Trajectory traj = rollout(bra, zero_policy(), State{0.5, 2.0}, 10);
  REQUIRE(traj.violated_at.has_value());
  const std::string path = "/tmp/feasreg_traj.csv";
  write_trajectory_csv(path, bra, g, traj);
  const Trajectory back = read_trajectory_csv(path, 2);
  REQUIRE(back.states.size() == traj.states.size());
  CHECK(back.violated_at == traj.violated_at);
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    CHECK(back.states[t][0] == traj.states[t][0]);
    CHECK(back.states[t][1] == traj.states[t][1]);
  }
  std::filesystem::remove(path);
}

TEST_CASE("tabular field save/load round trip") {
  const StateGrid grid = StateGrid::make({0, 0}, {2, 2}, {1, 1});
  std::vector<double> vals = {0.5, -1, 2, 3.25, -4, 5, 6, 7, 1e-17};
  TabularField f(grid, vals);
  const std::string path = "/tmp/feasreg_field.csv";
  f.save_csv(path);
  const auto back = TabularField::load_csv(path);
  REQUIRE(back->values.size() == vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) CHECK(back->values[i] == vals[i]);
  std::filesystem::remove(path);
}

TEST_CASE("svg figure is written and self-contained") {
  const RegionMap map = max_efr_braking(StateGrid::make({0, 0}, {10, 10}, {1, 1}));
  TrajectoryData t;
  t.points = {{8, 2}, {7, 2}, {6, 2}};
  t.violated_at = 2;
  const std::string path = "/tmp/feasreg_fig.svg";
  write_region_figure(path, map, {t}, "test");
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string svg = ss.str();
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("boundary_band marks only near-boundary nodes") {
  const RegionMap map = max_efr_braking(StateGrid::make({0, 0}, {10, 10}, {0.5, 0.5}));
  const auto band = boundary_band(map, FeasibilityLabel::EndlesslyFeasible);
  // deep-interior and deep-exterior nodes are off the band
  CHECK_FALSE(band[map.grid.nearest(State{9.5, 0.5})]);
  CHECK_FALSE(band[map.grid.nearest(State{0.0, 9.5})]);
  // the curve d = v^2/20 passes near (5, 10)
  CHECK(band[map.grid.nearest(State{5.0, 10.0})]);
}

TEST_CASE("simulate command writes one CSV per start and honors empty start lists") {
  ScenarioConfig cfg = ScenarioConfig::from_string(
      "system = braking\ncontroller.type = zero\nconstraint.family = pointwise\n"
      "simulate.steps = 5\nsimulate.starts = 9,0; 8,1\n");
  cfg.override_out("/tmp/feasreg_sim_test");
  CHECK(cmd_simulate(cfg) == 0);
  CHECK(std::filesystem::exists("/tmp/feasreg_sim_test/traj_000.csv"));
  CHECK(std::filesystem::exists("/tmp/feasreg_sim_test/traj_001.csv"));
  CHECK_FALSE(std::filesystem::exists("/tmp/feasreg_sim_test/traj_002.csv"));
  std::filesystem::remove_all("/tmp/feasreg_sim_test");
}
