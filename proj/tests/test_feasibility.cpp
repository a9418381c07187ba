#include <doctest.h>

#include <cmath>

#include "feasreg/feasibility.hpp"

using namespace feasreg;

namespace {
const SystemSpec bra = braking_spec();
const std::size_t kTmax = 500;
}  // namespace

TEST_CASE("hjr_braking_analytic") {
  const auto F = hjr_braking_analytic(-10.0);
  CHECK(F->value(State{5.0, 10.0}) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(F->value(State{5.0, 0.0}) == -5.0);
  CHECK(F->value(State{0.0, 0.0}) == 0.0);
  CHECK_THROWS_AS(hjr_braking_analytic(1.0), ModelError);
}

TEST_CASE("cvf_rollout") {
  SUBCASE("safe stationary state accumulates nothing") {
    CHECK(cvf_rollout(bra, zero_policy(), State{10.0, 0.0}, 0.99, kTmax) == 0.0);
  }
  SUBCASE("single violation at t=0, no re-entry afterwards") {
    // backward drift (raw model) exits the violating set after one step
    SystemSpec raw = bra;
    raw.stop_at_rest = false;
    const double got = cvf_rollout(raw, zero_policy(), State{-0.05, -1.0}, 0.99, kTmax);
    CHECK(got == 1.0);
  }
  SUBCASE("violations at t=0 and t=1 only") {
    SystemSpec raw = bra;
    raw.stop_at_rest = false;
    const double got = cvf_rollout(raw, zero_policy(), State{-0.15, -1.0}, 0.99, kTmax);
    CHECK(got == doctest::Approx(1.99).epsilon(1e-15));
  }
}

TEST_CASE("hjr_rollout") {
  SUBCASE("stationary state: max attained immediately") {
    CHECK(hjr_rollout(bra, zero_policy(), State{10.0, 0.0}, kTmax) == -10.0);
  }
  SUBCASE("doomed state exceeds +0.5 somewhere") {
    CHECK(hjr_rollout(bra, best_effort_policy(), State{0.5, 10.0}, kTmax) >= 0.5);
  }
  SUBCASE("boundary start stays within the one-step discretization bound") {
    const double val = hjr_rollout(bra, best_effort_policy(), State{5.0, 10.0}, kTmax);
    CHECK(val >= 0.0);          // discrete max braking overshoots the continuous limit
    CHECK(val <= 0.1 * 10.0);   // by at most dt * v_max
  }
}

TEST_CASE("cdf_rollout") {
  SUBCASE("violating now gives 1") {
    CHECK(cdf_rollout(bra, zero_policy(), State{-0.5, 0.0}, 0.99, kTmax) == 1.0);
  }
  SUBCASE("never violating gives 0") {
    CHECK(cdf_rollout(bra, zero_policy(), State{10.0, 0.0}, 0.99, kTmax) == 0.0);
  }
  SUBCASE("violation at step 3") {
    // coast at v = 2: d: 0.5, 0.3, 0.1, -0.1 -> N = 3
    const double got = cdf_rollout(bra, zero_policy(), State{0.5, 2.0}, 0.99, kTmax);
    CHECK(got == doctest::Approx(0.99 * 0.99 * 0.99).epsilon(1e-15));
  }
}

TEST_CASE("CA equivalence on sampled states (truncated definitions agree)") {
  Rng rng(7);
  const Policy pi = best_effort_policy();
  for (int k = 0; k < 200; ++k) {
    const State x{rng.uniform(0, 10), rng.uniform(0, 10)};
    const bool p_cvf = cvf_rollout(bra, pi, x, 0.99, kTmax) == 0.0;
    const bool p_hj = hjr_rollout(bra, pi, x, kTmax) <= kFeasTol;
    const bool p_cdf = cdf_rollout(bra, pi, x, 0.99, kTmax) == 0.0;
    CHECK(p_cvf == p_hj);
    CHECK(p_hj == p_cdf);
  }
}

TEST_CASE("CDF range: {0} union [gamma^(T_max-1), 1]") {
  Rng rng(11);
  const double gamma = 0.99;
  const double floor = std::pow(gamma, static_cast<double>(kTmax - 1));
  for (int k = 0; k < 200; ++k) {
    const State x{rng.uniform(-1, 10), rng.uniform(0, 10)};
    const double v = cdf_rollout(bra, zero_policy(), x, gamma, kTmax);
    const bool ok = v == 0.0 || (v >= floor - 1e-15 && v <= 1.0);
    CHECK(ok);
    if (bra.h(x) > kFeasTol) CHECK(v == 1.0);
  }
}

TEST_CASE("risky_backup single-sweep identities") {
  const StateGrid grid = StateGrid::make({0, 0}, {10, 10}, {0.5, 0.5});
  SUBCASE("CDF at a violating node is 1 regardless of F") {
    StateGrid g2 = StateGrid::make({-2, 0}, {2, 2}, {0.5, 0.5});
    auto F = std::make_shared<TabularField>(g2, std::vector<double>(g2.total(), -5.0));
    BackupRule rule{BackupFamily::CDF, 0.99, best_effort_policy(), 21};
    auto out = risky_backup(braking_spec(), rule, *F);
    for (std::size_t i = 0; i < g2.total(); ++i)
      if (braking_spec().h(g2.node(i)) > kFeasTol) CHECK(out->values[i] == 1.0);
  }
  SUBCASE("HJR discounted constant-field fixed point") {
    // nodes with h = -2 and F = -2 everywhere: backup = 0.01*(-2) + 0.99*(-2) = -2
    auto F = std::make_shared<TabularField>(grid, std::vector<double>(grid.total(), -2.0));
    BackupRule rule{BackupFamily::HJRDiscounted, 0.99, best_effort_policy(), 21};
    auto out = risky_backup(braking_spec(), rule, *F);
    for (std::size_t i = 0; i < grid.total(); ++i) {
      const State x = grid.node(i);
      if (std::abs(braking_spec().h(x) + 2.0) < 1e-12)
        CHECK(out->values[i] == doctest::Approx(-2.0).epsilon(1e-12));
    }
  }
  SUBCASE("CVF safe node with zero successor value stays 0") {
    auto F = std::make_shared<TabularField>(grid, std::vector<double>(grid.total(), 0.0));
    BackupRule rule{BackupFamily::CVF, 0.99, zero_policy(), 21};
    auto out = risky_backup(braking_spec(), rule, *F);
    for (std::size_t i = 0; i < grid.total(); ++i)
      if (braking_spec().h(grid.node(i)) <= kFeasTol) CHECK(out->values[i] == 0.0);
  }
}

TEST_CASE("fixed_point_solve: braking discounted HJR matches the discrete oracle") {
  const StateGrid grid = StateGrid::make({0, 0}, {10, 10}, {0.25, 0.25});
  BackupRule rule{BackupFamily::HJRDiscounted, 0.99, best_effort_policy(), 21};
  const auto res = fixed_point_solve(bra, rule, grid, 1e-6, 5000, 2);
  CHECK(res.residual < 1e-6);

  // contraction: residuals shrink geometrically after burn-in
  for (std::size_t k = 20; k + 1 < res.residuals.size(); ++k) {
    if (res.residuals[k] < 1e-12) break;
    CHECK(res.residuals[k + 1] <= res.residuals[k] * (0.99 + 0.05) + 1e-15);
  }

  // sign agreement with the max-braking rollout away from the boundary
  std::size_t agree = 0, checked = 0;
  for (std::size_t i = 0; i < grid.total(); ++i) {
    const State x = grid.node(i);
    const double oracle = hjr_rollout(bra, best_effort_policy(), x, kTmax);
    if (std::abs(oracle) < 0.3) continue;  // boundary band
    ++checked;
    if ((res.field->values[i] <= 0) == (oracle <= kFeasTol)) ++agree;
  }
  CHECK(checked > 500);
  CHECK(static_cast<double>(agree) / static_cast<double>(checked) >= 0.99);
}

TEST_CASE("fixed_point_solve: CDF on an all-violating grid is 1 after one sweep") {
  const StateGrid grid = StateGrid::make({-5, 0}, {-1, 2}, {0.5, 0.5});
  BackupRule rule{BackupFamily::CDF, 0.9, best_effort_policy(), 21};
  const auto res = fixed_point_solve(bra, rule, grid, 1e-9, 50, 1);
  for (double v : res.field->values) CHECK(v == 1.0);
}

TEST_CASE("fixed_point_solve reports non-convergence") {
  const StateGrid grid = StateGrid::make({0, 0}, {10, 10}, {1.0, 1.0});
  BackupRule rule{BackupFamily::HJRDiscounted, 0.99, best_effort_policy(), 21};
  CHECK_THROWS_AS(fixed_point_solve(bra, rule, grid, 1e-9, 3, 1), NonConvergence);
}

TEST_CASE("self_consistency_residual") {
  SUBCASE("converged tabular field satisfies its own backup to tol") {
    const StateGrid grid = StateGrid::make({0, 0}, {10, 10}, {0.5, 0.5});
    BackupRule rule{BackupFamily::CVF, 0.95, best_effort_policy(), 21};
    const auto res = fixed_point_solve(bra, rule, grid, 1e-8, 2000, 1);
    std::vector<State> nodes;
    for (std::size_t i = 0; i < grid.total(); ++i) nodes.push_back(grid.node(i));
    CHECK(self_consistency_residual(bra, rule, *res.field, nodes) <= 1e-7);
  }
  SUBCASE("analytic braking HJR under best effort: residual within one-step bound") {
    // undiscounted self-consistency F(x) = max(h(x), F(x')) holds exactly in
    // continuous time; the Euler step breaks it by at most dt * v_max
    const auto F = hjr_braking_analytic(-10.0);
    BackupRule rule{BackupFamily::HJRDiscounted, 0.999999, best_effort_policy(), 21};
    std::vector<State> samples;
    Rng rng(3);
    for (int k = 0; k < 200; ++k) samples.push_back(State{rng.uniform(1, 9), rng.uniform(1, 9)});
    CHECK(self_consistency_residual(bra, rule, *F, samples) <= 0.1 * 10.0);
  }
}

TEST_CASE("tabular field: interpolation exact at nodes, clamped outside the hull") {
  const StateGrid grid = StateGrid::make({0, 0}, {2, 2}, {1.0, 1.0});
  std::vector<double> vals = {0, 1, 2, 3, 4, 5, 6, 7, 8};  // 3x3
  TabularField F(grid, vals);
  for (std::size_t i = 0; i < grid.total(); ++i)
    CHECK(F.value(grid.node(i)) == doctest::Approx(vals[i]).epsilon(1e-12));
  CHECK(F.value(State{0.5, 0.5}) == doctest::Approx((0 + 1 + 3 + 4) / 4.0));
  CHECK(F.hull_clamps.load() == 0);
  CHECK(F.value(State{-1.0, 0.0}) == F.value(State{0.0, 0.0}));
  CHECK(F.hull_clamps.load() == 1);
}
