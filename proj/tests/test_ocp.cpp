#include <doctest.h>

#include <cmath>

#include "feasreg/ocp.hpp"

using namespace feasreg;

namespace {
const SystemSpec bra = braking_spec();

OcpSpec braking_ocp(const VirtualTimeConstraint& g, const State& x0) {
  OcpSpec p;
  p.spec = bra;
  p.N = 10;
  p.gamma_obj = 1.0;
  p.g = g;
  p.x0 = x0;
  return p;
}

const VirtualTimeConstraint hjr2 =
    make_field_constraint(hjr_braking_analytic(-10.0), FieldMode::TwoStep, ConstraintFamily::HJR);
}  // namespace

TEST_CASE("solve_ocp: interior state is feasible with zero effort") {
  const auto sol = solve_ocp(braking_ocp(hjr2, State{10.0, 0.0}));
  CHECK(sol.feasible);
  CHECK(sol.objective == 0.0);
  for (const Action& u : sol.actions) CHECK(u[0] == 0.0);
}

TEST_CASE("solve_ocp: deep-inside moving state is feasible") {
  // F(10, 5) = -10 + 25/20 = -8.75
  const auto sol = solve_ocp(braking_ocp(hjr2, State{10.0, 5.0}));
  CHECK(sol.feasible);
  CHECK(sol.objective == doctest::Approx(0.0));  // coasting is optimal for one step ahead
}

TEST_CASE("solve_ocp: infeasibility is reported, not thrown") {
  // pointwise n=2 from (0.05, 10): next d is negative under every action
  const auto sol = solve_ocp(braking_ocp(make_pointwise(2), State{0.05, 10.0}));
  CHECK_FALSE(sol.feasible);
  CHECK(sol.max_violation > 0.9);
}

TEST_CASE("solve_ocp: boundary-riding action is the minimal-effort feasible one") {
  // at (5.5, 10) the HJR two-step constraint requires (10 + 0.1 a)^2 <= 90
  const auto sol = solve_ocp(braking_ocp(hjr2, State{5.5, 10.0}));
  CHECK(sol.feasible);
  const double a_required = 10.0 * (std::sqrt(90.0) - 10.0);
  CHECK(sol.actions[0][0] <= a_required + 1e-4);
  CHECK(sol.actions[0][0] >= a_required - 0.05);
}

TEST_CASE("solver honesty: reported objective equals the re-simulated one") {
  for (const State& x0 : {State{5.5, 10.0}, State{8.0, 4.0}, State{2.0, 3.0}}) {
    const auto p = braking_ocp(hjr2, x0);
    const auto sol = solve_ocp(p);
    double obj = 0;
    State x = x0;
    for (int k = 0; k < p.N; ++k) {
      obj += bra.reward(x, sol.actions[static_cast<size_t>(k)]);
      x = step(bra, x, sol.actions[static_cast<size_t>(k)]);
    }
    CHECK(std::abs(obj - sol.objective) <= 1e-9);
  }
}

TEST_CASE("solver determinism under a fixed seed") {
  SolverParams prm;
  prm.seed = 123;
  const auto a = solve_ocp(braking_ocp(hjr2, State{5.3, 9.7}), prm);
  const auto b = solve_ocp(braking_ocp(hjr2, State{5.3, 9.7}), prm);
  REQUIRE(a.actions.size() == b.actions.size());
  for (std::size_t k = 0; k < a.actions.size(); ++k) CHECK(a.actions[k][0] == b.actions[k][0]);
  CHECK(a.objective == b.objective);
}

TEST_CASE("is_initially_feasible_state") {
  SUBCASE("first-step HJR constraint is exactly the field sign") {
    const auto g1 = make_field_constraint(hjr_braking_analytic(-10.0), FieldMode::FirstStep,
                                          ConstraintFamily::HJR);
    Rng rng(5);
    for (int k = 0; k < 100; ++k) {
      const State x{rng.uniform(0, 10), rng.uniform(0, 10)};
      const bool want = -x[0] + x[1] * x[1] / 20.0 <= kFeasTol;
      CHECK(is_initially_feasible_state(bra, g1, x) == want);
    }
  }
  SUBCASE("pointwise n=0 is exactly the constrained set") {
    const auto g0 = make_pointwise(0);
    CHECK(is_initially_feasible_state(bra, g0, State{0.0, 5.0}));
    CHECK_FALSE(is_initially_feasible_state(bra, g0, State{-0.1, 0.0}));
  }
  SUBCASE("two-step HJR matches the one-step reachability closed form") {
    // feasible iff F(x) <= 0 and min_a F(f(x,a)) <= 0
    Rng rng(9);
    for (int k = 0; k < 60; ++k) {
      const State x{rng.uniform(0, 10), rng.uniform(1, 10)};
      const double f0 = -x[0] + x[1] * x[1] / 20.0;
      const double fmin = -(x[0] - 0.1 * x[1]) + (x[1] - 1) * (x[1] - 1) / 20.0;
      const bool want = f0 <= kFeasTol && fmin <= kFeasTol;
      CHECK(is_initially_feasible_state(bra, hjr2, x) == want);
    }
  }
  SUBCASE("CBF boundary state at full braking authority") {
    // B = 0 at (5, 10); a = a_brk gives B' = 0.05 > 0: discretely infeasible,
    // and the solver must prove it rather than claim success
    const auto gcbf = make_cbf_constraint(cbf_braking(0.05), 0.1);
    CHECK_FALSE(is_initially_feasible_state(bra, gcbf, State{5.0, 10.0}));
    CHECK(is_initially_feasible_state(bra, gcbf, State{6.0, 10.0}));
  }
}

TEST_CASE("is_initially_feasible_policy") {
  SUBCASE("step-0 violation is policy independent") {
    CHECK_FALSE(is_initially_feasible_policy(bra, make_pointwise(2), zero_policy(),
                                             State{-0.5, 0.0}));
    CHECK_FALSE(
        is_initially_feasible_policy(bra, make_pointwise(2), best_effort_policy(), State{-0.5, 0.0}));
  }
  SUBCASE("zero policy under pointwise n=10 from a doomed state") {
    CHECK_FALSE(
        is_initially_feasible_policy(bra, make_pointwise(10), zero_policy(), State{0.5, 10.0}));
  }
  SUBCASE("best effort under two-step HJR inside the discrete max EFR") {
    CHECK(is_initially_feasible_policy(bra, hjr2, best_effort_policy(), State{6.0, 10.0}));
  }
}

TEST_CASE("soundness: a feasible policy witnesses state feasibility") {
  Rng rng(17);
  for (const auto& g : {hjr2, make_pointwise(3), make_cbf_constraint(cbf_braking(0.1), 0.1)}) {
    for (int k = 0; k < 40; ++k) {
      const State x{rng.uniform(0, 10), rng.uniform(0, 10)};
      for (const Policy& pi : {zero_policy(), best_effort_policy()}) {
        if (is_initially_feasible_policy(bra, g, pi, x))
          CHECK(is_initially_feasible_state(bra, g, x));
      }
    }
  }
}

TEST_CASE("mpc_policy") {
  const SolverParams prm;
  SUBCASE("zero action forever from rest") {
    const Policy pi = mpc_policy(braking_ocp(hjr2, State{10.0, 0.0}), prm);
    const auto r = pi.act(bra, State{10.0, 0.0});
    CHECK(r.feasible);
    CHECK(r.u[0] == 0.0);
  }
  SUBCASE("receding-horizon consistency: executed step equals the plan's first step") {
    const auto p = braking_ocp(hjr2, State{6.0, 8.0});
    const auto sol = solve_ocp(p, prm);
    const Policy pi = mpc_policy(p, prm);
    const State via_policy = step(bra, p.x0, pi.act(bra, p.x0).u);
    const State via_plan = step(bra, p.x0, sol.actions[0]);
    CHECK(via_policy[0] == via_plan[0]);
    CHECK(via_policy[1] == via_plan[1]);
  }
  SUBCASE("infeasible state falls back to best-effort max braking") {
    const Policy pi = mpc_policy(braking_ocp(hjr2, State{5.0, 10.0}), prm);
    const auto r = pi.act(bra, State{5.0, 10.0});
    CHECK_FALSE(r.feasible);
    CHECK(r.u[0] == doctest::Approx(-10.0).epsilon(1e-6));
  }
  SUBCASE("MPC-as-optimal: state feasibility equals MPC policy feasibility") {
    const Policy pi = mpc_policy(braking_ocp(hjr2, State{0, 0}), prm);
    Rng rng(23);
    for (int k = 0; k < 40; ++k) {
      const State x{rng.uniform(0, 10), rng.uniform(0, 10)};
      const bool st = is_initially_feasible_state(bra, hjr2, x);
      const bool po = is_initially_feasible_policy(bra, hjr2, pi, x);
      CHECK(st == po);
    }
  }
}

TEST_CASE("unicycle OCP: forward progress with pointwise avoidance") {
  const SystemSpec uni = unicycle_spec();
  OcpSpec p;
  p.spec = uni;
  p.N = 10;
  p.gamma_obj = 1.0;
  p.g = make_pointwise(10);
  State x0 = State::zeros(4);
  x0[0] = 0.0;
  x0[1] = -2.0;
  x0[2] = 1.0;
  x0[3] = 1.5707963267948966;
  p.x0 = x0;
  const auto sol = solve_ocp(p);
  CHECK(sol.feasible);
  CHECK(sol.objective > -20.0);  // sane magnitude
  // executing the plan must keep h <= 0 within the window
  State x = x0;
  for (const Action& u : sol.actions) {
    x = step(uni, x, u);
    CHECK(uni.h(x) <= kFeasTol);
  }
}
