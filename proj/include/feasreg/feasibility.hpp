#pragma once

#include <optional>
#include <span>

#include "feasreg/field.hpp"

namespace feasreg {

/// One-step recursion family for CA-type feasibility functions.
enum class BackupFamily { CVF, HJRDiscounted, CDF };

/// Backup rule for the risky self-consistency / risky Bellman equations.
/// With a policy: F(x) <- backup(h/c at x, F(f(x, pi(x)))).
/// Without:       the action minimizing the backed-up value over a uniform
///                lattice (action_lattice points per axis) is used.
struct BackupRule {
  BackupFamily family = BackupFamily::HJRDiscounted;
  double gamma = 0.99;
  std::optional<Policy> policy;  // absent => minimize over the action lattice
  int action_lattice = 21;
};

// --- rollout-based definitions (truncated at T_max states) ---

// sum_{t < T_max} gamma^t 1[h(x_t) > 0]
double cvf_rollout(const SystemSpec& spec, const Policy& pi, const State& x, double gamma,
                   std::size_t T_max);
// max_{t < T_max} h(x_t)
double hjr_rollout(const SystemSpec& spec, const Policy& pi, const State& x, std::size_t T_max);
// gamma^N with N = steps to first violation; 0 if no violation within T_max states
double cdf_rollout(const SystemSpec& spec, const Policy& pi, const State& x, double gamma,
                   std::size_t T_max);

// --- tabular fixed-point machinery ---

struct BackupDiag {
  long hull_clamps = 0;
};

/// One synchronous sweep over all grid nodes; reads `F`, returns a fresh field.
std::shared_ptr<TabularField> risky_backup(const SystemSpec& spec, const BackupRule& rule,
                                           const TabularField& F, BackupDiag* diag = nullptr);

struct FixedPointResult {
  std::shared_ptr<TabularField> field;
  std::size_t iterations = 0;
  double residual = 0;            // final sup-norm change
  std::vector<double> residuals;  // per-sweep history
  long hull_clamps = 0;
};

struct NonConvergence : std::runtime_error {
  double residual;
  NonConvergence(double r, std::size_t iters)
      : std::runtime_error("fixed_point_solve: no convergence after " + std::to_string(iters) +
                           " sweeps (residual " + std::to_string(r) + ")"),
        residual(r) {}
};

FixedPointResult fixed_point_solve(const SystemSpec& spec, const BackupRule& rule,
                                   const StateGrid& grid, double tol, std::size_t max_iters,
                                   int jobs = 1);

/// Extends the first axis of a braking sweep grid below d = 0 so the violating
/// set is representable in a tabular field; hull clamps at the extended bottom
/// then read unambiguously positive values instead of hiding crashes.
StateGrid extended_braking_grid(const StateGrid& grid, double margin = 2.0);

/// max over samples of |F(x) - backup(F)(x)|
double self_consistency_residual(const SystemSpec& spec, const BackupRule& rule,
                                 const FeasibilityField& F, std::span<const State> samples);

}  // namespace feasreg
