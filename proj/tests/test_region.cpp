#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "feasreg/region.hpp"

using namespace feasreg;

namespace {
const SystemSpec bra = braking_spec();
const StateGrid coarse = StateGrid::make({0, 0}, {10, 10}, {0.25, 0.25});
const VirtualTimeConstraint hjr2 =
    make_field_constraint(hjr_braking_analytic(-10.0), FieldMode::TwoStep, ConstraintFamily::HJR);

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

TEST_CASE("max_efr_braking is exactly the analytic predicate") {
  const RegionMap map = max_efr_braking(coarse);
  for (std::size_t i = 0; i < coarse.total(); ++i) {
    const State x = coarse.node(i);
    CHECK(is_endless(map.labels[i]) == (x[0] >= x[1] * x[1] / 20.0));
  }
}

TEST_CASE("max_efr_braking_discrete sits inside the analytic region") {
  const RegionMap ana = max_efr_braking(coarse);
  const RegionMap dis = max_efr_braking_discrete(coarse);
  const auto rep = check_containment(dis, ana, FeasibilityLabel::EndlesslyFeasible);
  CHECK(rep.holds);
  CHECK(rep.count_a < rep.count_b);  // the Euler overshoot strictly shrinks it
  // spot values: (5, 10) is analytic-boundary but discretely doomed
  const std::size_t i = coarse.nearest(State{5.0, 10.0});
  CHECK(is_endless(ana.labels[i]));
  CHECK_FALSE(is_endless(dis.labels[i]));
}

TEST_CASE("label_policy_region with the best-effort policy") {
  const RegionMap map = label_policy_region(bra, hjr2, best_effort_policy(), coarse, 500, 2);
  SUBCASE("label lattice and containment in the analytic max EFR") {
    const RegionMap ana = max_efr_braking(coarse);
    CHECK(check_containment(map, ana, FeasibilityLabel::EndlesslyFeasible).holds);
    for (std::size_t i = 0; i < map.labels.size(); ++i)
      if (is_endless(map.labels[i])) CHECK(is_initially(map.labels[i]));
  }
  SUBCASE("EFR equals the discrete oracle away from the boundary") {
    const RegionMap dis = max_efr_braking_discrete(coarse);
    std::size_t diff = 0;
    for (std::size_t i = 0; i < map.labels.size(); ++i)
      if (is_endless(map.labels[i]) != is_endless(dis.labels[i])) ++diff;
    // the best-effort policy under the two-step HJR constraint realizes the
    // discrete max EFR except for boundary-precision cells
    CHECK(diff <= coarse.total() / 100);
  }
}

TEST_CASE("always-violating toy labels everything infeasible") {
  SystemSpec toy = bra;
  // g = pointwise over h with an impossible region: put the grid below d = 0
  const StateGrid neg = StateGrid::make({-5, 0}, {-1, 2}, {0.5, 0.5});
  const RegionMap map = label_policy_region(toy, make_pointwise(2), zero_policy(), neg, 50, 1);
  for (auto l : map.labels) CHECK(l == FeasibilityLabel::Infeasible);
}

TEST_CASE("label_state_region") {
  SUBCASE("CBF k=0.05: IFR strictly inside {B <= 0} because of the one-step condition") {
    const auto g = make_cbf_constraint(cbf_braking(0.05), 0.1);
    const RegionMap map = label_state_region(bra, g, coarse, SolverParams{}, 2);
    for (std::size_t i = 0; i < coarse.total(); ++i) {
      const State x = coarse.node(i);
      if (is_initially(map.labels[i])) {
        CHECK(-x[0] + 0.05 * x[1] * x[1] <= kFeasTol);
        CHECK(is_endless(map.labels[i]));  // CIS family: EFR = IFR
      }
    }
  }
  SUBCASE("pointwise n=0: IFR is the constrained set, EFR the certified intersection") {
    const RegionMap map = label_state_region(bra, make_pointwise(0), coarse, SolverParams{}, 2);
    const RegionMap ana = max_efr_braking(coarse);
    for (std::size_t i = 0; i < coarse.total(); ++i) {
      const State x = coarse.node(i);
      CHECK(is_initially(map.labels[i]) == (bra.h(x) <= kFeasTol));
      CHECK(is_endless(map.labels[i]) == (bra.h(x) <= kFeasTol && is_endless(ana.labels[i])));
    }
    CHECK(map.metadata.at("method").find("under-approximation") != std::string::npos);
  }
  SUBCASE("SI boundary is the square-root curve") {
    const auto g = make_si_constraint(SiParams{0.12, 0.0, 0.5, 0.23, 0.0});
    const RegionMap map = label_state_region(bra, g, coarse, SolverParams{}, 2);
    for (std::size_t i = 0; i < coarse.total(); ++i) {
      const State x = coarse.node(i);
      const double phi = 0.12 - std::sqrt(std::abs(x[0])) * (x[0] >= 0 ? 1 : -1) + 0.23 * x[1];
      if (phi > 0.05) CHECK_FALSE(is_initially(map.labels[i]));
    }
  }
}

TEST_CASE("check_containment reports violating cells") {
  RegionMap a, b;
  a.grid = b.grid = StateGrid::make({0, 0}, {1, 1}, {0.5, 0.5});
  a.labels.assign(9, FeasibilityLabel::EndlesslyFeasible);
  b.labels.assign(9, FeasibilityLabel::EndlesslyFeasible);
  b.labels[4] = FeasibilityLabel::Infeasible;
  const auto rep = check_containment(a, b, FeasibilityLabel::EndlesslyFeasible);
  CHECK_FALSE(rep.holds);
  CHECK(rep.violation_count == 1);
  CHECK(rep.violations[0] == 4);
  const auto ok = check_containment(b, a, FeasibilityLabel::EndlesslyFeasible);
  CHECK(ok.holds);
}

TEST_CASE("check_monotonicity") {
  auto mk = [&](std::size_t efr_cells) {
    RegionMap m;
    m.grid = StateGrid::make({0, 0}, {1, 1}, {0.5, 0.5});
    m.labels.assign(9, FeasibilityLabel::InitiallyFeasible);
    for (std::size_t i = 0; i < efr_cells; ++i) m.labels[i] = FeasibilityLabel::EndlesslyFeasible;
    return m;
  };
  SUBCASE("ordered chain holds") {
    CHECK(check_monotonicity({mk(2), mk(4), mk(6)}).holds);
  }
  SUBCASE("single map vacuously holds") { CHECK(check_monotonicity({mk(3)}).holds); }
  SUBCASE("shuffled order is rejected") {
    CHECK_FALSE(check_monotonicity({mk(6), mk(2), mk(4)}).holds);
  }
}

TEST_CASE("check_equivalence_conditions") {
  SUBCASE("HJR state map: every IFR cell has an action back into the IFR") {
    const RegionMap map = label_state_region(bra, hjr2, coarse, SolverParams{}, 2);
    const auto rep = check_equivalence_conditions(map, bra, 21, 2);
    CHECK(rep.checked > 0);
    CHECK(rep.failure_count == 0);
  }
  SUBCASE("empty IFR vacuously passes") {
    RegionMap m;
    m.grid = coarse;
    m.labels.assign(coarse.total(), FeasibilityLabel::Infeasible);
    const auto rep = check_equivalence_conditions(m, bra, 5, 1);
    CHECK(rep.checked == 0);
    CHECK(rep.holds());
  }
}

TEST_CASE("region_stats") {
  RegionMap m;
  m.grid = StateGrid::make({0, 0}, {1, 1}, {0.5, 0.5});
  m.labels.assign(9, FeasibilityLabel::Infeasible);
  SUBCASE("all infeasible") {
    const auto st = region_stats(m);
    CHECK(st.frac_infeasible == 1.0);
    CHECK(st.frac_endless == 0.0);
  }
  SUBCASE("fractions sum to one") {
    m.labels[0] = FeasibilityLabel::EndlesslyFeasible;
    m.labels[1] = FeasibilityLabel::InitiallyFeasible;
    const auto st = region_stats(m);
    CHECK(st.frac_infeasible + st.frac_initially + st.frac_endless == doctest::Approx(1.0));
    CHECK(st.endless == 1);
    CHECK(st.initially == 1);
  }
}

TEST_CASE("max-EFR area matches the closed-form fraction") {
  const StateGrid fine = StateGrid::make({0, 0}, {10, 10}, {0.1, 0.1});
  const RegionMap map = max_efr_braking(fine);
  const auto st = region_stats(map);
  // area above d = v^2/20 on [0,10]^2 is (100 - 16.67)/100
  CHECK(st.frac_endless == doctest::Approx(0.8333).epsilon(0.01));
}

TEST_CASE("region CSV round trip is bitwise identical") {
  const RegionMap map = max_efr_braking(StateGrid::make({0, 0}, {10, 10}, {0.5, 0.5}));
  const std::string p1 = "/tmp/feasreg_region_a.csv", p2 = "/tmp/feasreg_region_b.csv";
  map.save_csv(p1);
  const RegionMap back = RegionMap::load_csv(p1);
  REQUIRE(back.labels.size() == map.labels.size());
  for (std::size_t i = 0; i < map.labels.size(); ++i) CHECK(back.labels[i] == map.labels[i]);
  back.save_csv(p2);
  CHECK(slurp(p1) == slurp(p2));
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("forward invariance of the best-effort EFR under HJR") {
  const RegionMap map = label_policy_region(bra, hjr2, best_effort_policy(), coarse, 500, 2);
  const auto rep = check_forward_invariance(map, bra, best_effort_policy(), 200, 150, 99, 2);
  CHECK(rep.rollouts > 0);
  CHECK(rep.holds());
}
