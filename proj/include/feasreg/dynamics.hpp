#pragma once

#include <optional>
#include <string>

#include "feasreg/common.hpp"

namespace feasreg {

// Residuals within this tolerance of zero count as satisfied (closed constrained sets).
constexpr double kFeasTol = 1e-6;

enum class SystemKind { Braking, Unicycle };

/// Deterministic discrete-time system model with box-bounded actions.
///
/// braking:   x = (d, v), u = (a);  d' = d - dt*v, v' = v + dt*a
/// unicycle:  x = (y, z, v, theta), u = (a, omega);
///            y' = y + dt*v*cos(theta), z' = z + dt*v*sin(theta),
///            v' = v + dt*a, theta' = theta + dt*omega
struct SystemSpec {
  SystemKind kind = SystemKind::Braking;
  std::string name = "braking";
  double dt = 0.1;
  int state_dim = 2;
  int action_dim = 1;
  Action action_lower{-10.0};
  Action action_upper{0.0};
  // Freezes the braking state once v <= 0 (the raw linear model would reverse).
  bool stop_at_rest = true;
  double obstacle_radius = 0.5;  // unicycle only

  double reward(const State& x, const Action& u) const {
    if (kind == SystemKind::Braking) return -u[0] * u[0];
    return x[1];  // forward progress along z
  }

  // Real-time constraint h(x) <= 0.
  double h(const State& x) const {
    if (kind == SystemKind::Braking) return -x[0];
    return obstacle_radius - std::sqrt(x[0] * x[0] + x[1] * x[1]);
  }

  void check_state(const State& x) const {
    if (x.size() != state_dim) throw ModelError(name + ": state dimension mismatch");
  }
  void check_action(const Action& u) const {
    if (u.size() != action_dim) throw ModelError(name + ": action dimension mismatch");
  }
};

SystemSpec braking_spec();
SystemSpec unicycle_spec();

Action clamp(const SystemSpec& spec, const Action& u);
State step(const SystemSpec& spec, const State& x, const Action& u);

// Jacobians of the step map, used by the adjoint pass of the OCP solver.
// fx is state_dim x state_dim (row-major in a 4x4 buffer), fu is state_dim x action_dim.
void step_jacobians(const SystemSpec& spec, const State& x, const Action& u,
                    double fx[4][4], double fu[4][2]);

struct ActResult {
  Action u;
  bool feasible = true;  // false when the policy fell back to best-effort control
};

/// State -> action map. Stateless and safe to evaluate concurrently.
struct Policy {
  std::string name;
  std::function<ActResult(const SystemSpec&, const State&)> act;

  Action operator()(const SystemSpec& spec, const State& x) const { return act(spec, x).u; }
};

Policy zero_policy();
Policy best_effort_policy();

struct Trajectory {
  std::vector<State> states;
  std::vector<Action> actions;              // length = states - 1
  std::optional<std::size_t> violated_at;   // first index with h > tol
};

struct PolicyError : std::runtime_error {
  std::size_t step_index;
  PolicyError(const std::string& what, std::size_t idx)
      : std::runtime_error(what + " (at rollout step " + std::to_string(idx) + ")"),
        step_index(idx) {}
};

Trajectory rollout(const SystemSpec& spec, const Policy& policy, const State& x0, std::size_t T);

}  // namespace feasreg
