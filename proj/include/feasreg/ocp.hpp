#pragma once

#include "feasreg/constraints.hpp"

namespace feasreg {

struct SolverParams {
  int lattice_levels = 5;   // action levels per axis per step in the coarse search
  int beam_width = 32;      // beam cap on the lattice search
  int restarts = 4;         // seeded random restarts for the gradient stage
  int outer_rounds = 6;     // augmented-Lagrangian rounds
  double penalty_init = 10.0;
  double penalty_mult = 10.0;
  int max_inner_iters = 80;
  double feas_tol = kFeasTol;
  uint64_t seed = 0;
};

struct OcpSpec {
  SystemSpec spec;
  int N = 10;              // objective horizon (number of actions)
  double gamma_obj = 1.0;  // 1.0 for MPC, 0.99 for the RL target
  VirtualTimeConstraint g;
  State x0;
};

struct OcpSolution {
  std::vector<Action> actions;
  double objective = 0;
  bool feasible = false;   // max_violation <= feas_tol
  double max_violation = 0;
  long iterations = 0;     // inner gradient iterations spent
  int restarts_used = 0;
};

/// Maximizes sum_i gamma^i r(x_i, u_i) subject to g(x_{i|t}) <= 0.
/// An infeasible outcome is a valid result, reported through the flag; the
/// returned sequence is then the minimum-violation one found.
OcpSolution solve_ocp(const OcpSpec& p, const SolverParams& params = {});

/// Feasibility-only solve: minimizes the Chebyshev (max) constraint violation
/// over the first g.n actions, ignoring the objective.
OcpSolution solve_feasibility(const SystemSpec& spec, const VirtualTimeConstraint& g,
                              const State& x0, const SolverParams& params = {});

bool is_initially_feasible_state(const SystemSpec& spec, const VirtualTimeConstraint& g,
                                 const State& x, const SolverParams& params = {});

bool is_initially_feasible_policy(const SystemSpec& spec, const VirtualTimeConstraint& g,
                                  const Policy& pi, const State& x);

/// Receding-horizon policy: solves the OCP rooted at the queried state and
/// applies the first action; falls back to minimum-violation best effort when
/// the OCP is infeasible (flagged in ActResult::feasible).
Policy mpc_policy(const OcpSpec& p_template, const SolverParams& params = {});

}  // namespace feasreg
