#include "feasreg/dynamics.hpp"

#include <algorithm>

namespace feasreg {

SystemSpec braking_spec() {
  SystemSpec s;
  s.kind = SystemKind::Braking;
  s.name = "braking";
  s.dt = 0.1;
  s.state_dim = 2;
  s.action_dim = 1;
  s.action_lower = Action{-10.0};
  s.action_upper = Action{0.0};
  return s;
}

SystemSpec unicycle_spec() {
  SystemSpec s;
  s.kind = SystemKind::Unicycle;
  s.name = "unicycle";
  s.dt = 0.1;
  s.state_dim = 4;
  s.action_dim = 2;
  const double wmax = 3.14159265358979323846 / 4.0;
  s.action_lower = Action{-1.0, -wmax};
  s.action_upper = Action{1.0, wmax};
  s.obstacle_radius = 0.5;
  return s;
}

Action clamp(const SystemSpec& spec, const Action& u) {
  spec.check_action(u);
  Action out = u;
  for (int i = 0; i < spec.action_dim; ++i)
    out[i] = std::min(spec.action_upper[i], std::max(spec.action_lower[i], u[i]));
  return out;
}

State step(const SystemSpec& spec, const State& x, const Action& u) {
  spec.check_state(x);
  spec.check_action(u);
  if (spec.kind == SystemKind::Braking) {
    if (spec.stop_at_rest && x[1] <= 0.0) return x;  // frozen at rest
    State out = State::zeros(2);
    out[0] = x[0] - spec.dt * x[1];
    out[1] = x[1] + spec.dt * u[0];
    return out;
  }
  State out = State::zeros(4);
  out[0] = x[0] + spec.dt * x[2] * std::cos(x[3]);
  out[1] = x[1] + spec.dt * x[2] * std::sin(x[3]);
  out[2] = x[2] + spec.dt * u[0];
  out[3] = x[3] + spec.dt * u[1];
  return out;
}

void step_jacobians(const SystemSpec& spec, const State& x, const Action& u,
                    double fx[4][4], double fu[4][2]) {
  (void)u;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) fx[i][j] = (i == j) ? 1.0 : 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) fu[i][j] = 0.0;
  if (spec.kind == SystemKind::Braking) {
    if (spec.stop_at_rest && x[1] <= 0.0) {
      // frozen state: identity in x, insensitive to u
      return;
    }
    fx[0][1] = -spec.dt;
    fu[1][0] = spec.dt;
    return;
  }
  const double c = std::cos(x[3]), s = std::sin(x[3]);
  fx[0][2] = spec.dt * c;
  fx[0][3] = -spec.dt * x[2] * s;
  fx[1][2] = spec.dt * s;
  fx[1][3] = spec.dt * x[2] * c;
  fu[2][0] = spec.dt;
  fu[3][1] = spec.dt;
}

Policy zero_policy() {
  Policy p;
  p.name = "zero";
  p.act = [](const SystemSpec& spec, const State&) {
    Action u = Action::zeros(spec.action_dim);
    return ActResult{clamp(spec, u), true};
  };
  return p;
}

Policy best_effort_policy() {
  Policy p;
  p.name = "best_effort";
  p.act = [](const SystemSpec& spec, const State&) {
    // maximum deceleration, no steering
    Action u = Action::zeros(spec.action_dim);
    u[0] = spec.action_lower[0];
    return ActResult{u, true};
  };
  return p;
}

Trajectory rollout(const SystemSpec& spec, const Policy& policy, const State& x0, std::size_t T) {
  spec.check_state(x0);
  if (T < 1) throw ModelError("rollout: T must be >= 1");
  Trajectory traj;
  traj.states.reserve(T + 1);
  traj.actions.reserve(T);
  traj.states.push_back(x0);
  for (std::size_t t = 0; t < T; ++t) {
    Action u;
    try {
      u = clamp(spec, policy(spec, traj.states.back()));
    } catch (const std::exception& e) {
      throw PolicyError(std::string("policy evaluation failed: ") + e.what(), t);
    }
    traj.actions.push_back(u);
    traj.states.push_back(step(spec, traj.states.back(), u));
  }
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    if (spec.h(traj.states[k]) > kFeasTol) {
      traj.violated_at = k;
      break;
    }
  }
  return traj;
}

}  // namespace feasreg
