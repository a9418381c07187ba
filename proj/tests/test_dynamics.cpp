#include <doctest.h>

#include "feasreg/dynamics.hpp"

using namespace feasreg;

TEST_CASE("braking step matches the closed-form model") {
  const SystemSpec spec = braking_spec();
  const State x{10.0, 5.0};
  const State y = step(spec, x, Action{-10.0});
  CHECK(y[0] == doctest::Approx(9.5).epsilon(1e-15));
  CHECK(y[1] == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("braking zero velocity zero input is a fixed point") {
  const SystemSpec spec = braking_spec();
  const State x{7.0, 0.0};
  const State y = step(spec, x, Action{0.0});
  CHECK(y[0] == 7.0);
  CHECK(y[1] == 0.0);
}

TEST_CASE("unicycle step matches the closed-form model") {
  const SystemSpec spec = unicycle_spec();
  const double th = 3.14159265358979323846 / 2.0;
  State x = State::zeros(4);
  x[2] = 1.0;
  x[3] = th;
  const State y = step(spec, x, Action{0.0, 0.0});
  CHECK(y[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(y[1] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(y[2] == 1.0);
  CHECK(y[3] == th);
}

TEST_CASE("clamp projects onto the action box") {
  const SystemSpec bra = braking_spec();
  CHECK(clamp(bra, Action{-15.0})[0] == -10.0);
  CHECK(clamp(bra, Action{3.0})[0] == 0.0);
  const SystemSpec uni = unicycle_spec();
  const Action u = clamp(uni, Action{0.5, -2.0});
  CHECK(u[0] == 0.5);
  CHECK(u[1] == doctest::Approx(-3.14159265358979323846 / 4.0));
}

TEST_CASE("step rejects dimension mismatches") {
  const SystemSpec spec = braking_spec();
  CHECK_THROWS_AS(step(spec, State{1.0, 2.0, 3.0}, Action{0.0}), ModelError);
  CHECK_THROWS_AS(step(spec, State{1.0, 2.0}, Action{0.0, 0.0}), ModelError);
}

TEST_CASE("rollout flags the first violating step") {
  const SystemSpec spec = braking_spec();
  SUBCASE("doomed high-speed start violates at step 1") {
    const Trajectory t = rollout(spec, best_effort_policy(), State{0.5, 10.0}, 5);
    REQUIRE(t.violated_at.has_value());
    CHECK(*t.violated_at == 1);
  }
  SUBCASE("stationary safe start never violates") {
    const Trajectory t = rollout(spec, zero_policy(), State{10.0, 0.0}, 10);
    CHECK(!t.violated_at.has_value());
  }
  SUBCASE("violated_at is minimal") {
    const Trajectory t = rollout(spec, zero_policy(), State{1.0, 2.0}, 20);
    REQUIRE(t.violated_at.has_value());
    for (std::size_t k = 0; k < *t.violated_at; ++k) CHECK(spec.h(t.states[k]) <= kFeasTol);
    CHECK(spec.h(t.states[*t.violated_at]) > kFeasTol);
  }
}

TEST_CASE("trajectories are exactly reproducible") {
  const SystemSpec spec = braking_spec();
  const Trajectory a = rollout(spec, best_effort_policy(), State{5.0, 10.0}, 30);
  const Trajectory b = rollout(spec, best_effort_policy(), State{5.0, 10.0}, 30);
  REQUIRE(a.states.size() == b.states.size());
  for (std::size_t k = 0; k < a.states.size(); ++k)
    for (int d = 0; d < 2; ++d) CHECK(a.states[k][d] == b.states[k][d]);
}

TEST_CASE("braking state update is linear in the state") {
  const SystemSpec spec = braking_spec();
  const Action u{-3.0};
  const State x1{8.0, 6.0}, x2{2.0, 1.0};
  for (double alpha : {0.0, 0.25, 0.5, 1.0}) {
    State mix = State::zeros(2);
    for (int d = 0; d < 2; ++d) mix[d] = alpha * x1[d] + (1 - alpha) * x2[d];
    const State lhs = step(spec, mix, u);
    const State a = step(spec, x1, u), b = step(spec, x2, u);
    for (int d = 0; d < 2; ++d)
      CHECK(lhs[d] == doctest::Approx(alpha * a[d] + (1 - alpha) * b[d]).epsilon(1e-12));
  }
}

TEST_CASE("stop_at_rest freezes the state, raw model reverses") {
  SystemSpec spec = braking_spec();
  const State rest{3.0, 0.0};
  const State frozen = step(spec, rest, Action{-10.0});
  CHECK(frozen[0] == 3.0);
  CHECK(frozen[1] == 0.0);
  spec.stop_at_rest = false;
  const State raw = step(spec, rest, Action{-10.0});
  CHECK(raw[1] == doctest::Approx(-1.0));
}

TEST_CASE("policy failures carry the rollout step index") {
  const SystemSpec spec = braking_spec();
  Policy bad;
  bad.name = "bad";
  int calls = 0;
  bad.act = [&calls](const SystemSpec& s, const State&) -> ActResult {
    if (++calls >= 3) throw std::runtime_error("boom");
    return {Action::zeros(s.action_dim), true};
  };
  try {
    rollout(spec, bad, State{5.0, 0.0}, 10);
    FAIL("expected PolicyError");
  } catch (const PolicyError& e) {
    CHECK(e.step_index == 2);
  }
}
