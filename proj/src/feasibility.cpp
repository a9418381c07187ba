#include "feasreg/feasibility.hpp"

#include <algorithm>
#include <cmath>

namespace feasreg {

namespace {

inline double cost_signal(const SystemSpec& spec, const State& x) {
  return spec.h(x) > kFeasTol ? 1.0 : 0.0;
}

// backup of a single value: b(x, Fnext)
inline double apply_backup(const BackupRule& rule, const SystemSpec& spec, const State& x,
                           double f_next) {
  switch (rule.family) {
    case BackupFamily::CVF:
      return cost_signal(spec, x) + rule.gamma * f_next;
    case BackupFamily::CDF: {
      const double c = cost_signal(spec, x);
      return c + (1.0 - c) * rule.gamma * f_next;
    }
    case BackupFamily::HJRDiscounted: {
      const double hx = spec.h(x);
      return (1.0 - rule.gamma) * hx + rule.gamma * std::max(hx, f_next);
    }
  }
  return 0;
}

}  // namespace

double cvf_rollout(const SystemSpec& spec, const Policy& pi, const State& x, double gamma,
                   std::size_t T_max) {
  if (!(gamma > 0 && gamma < 1)) throw ModelError("cvf_rollout: gamma must be in (0,1)");
  if (T_max < 1) throw ModelError("cvf_rollout: T_max must be >= 1");
  double acc = 0, disc = 1;
  State s = x;
  for (std::size_t t = 0; t < T_max; ++t) {
    acc += disc * cost_signal(spec, s);
    disc *= gamma;
    if (t + 1 < T_max) s = step(spec, s, clamp(spec, pi(spec, s)));
  }
  return acc;
}

double hjr_rollout(const SystemSpec& spec, const Policy& pi, const State& x, std::size_t T_max) {
  if (T_max < 1) throw ModelError("hjr_rollout: T_max must be >= 1");
  double worst = -std::numeric_limits<double>::infinity();
  State s = x;
  for (std::size_t t = 0; t < T_max; ++t) {
    worst = std::max(worst, spec.h(s));
    if (t + 1 < T_max) s = step(spec, s, clamp(spec, pi(spec, s)));
  }
  return worst;
}

double cdf_rollout(const SystemSpec& spec, const Policy& pi, const State& x, double gamma,
                   std::size_t T_max) {
  if (!(gamma > 0 && gamma < 1)) throw ModelError("cdf_rollout: gamma must be in (0,1)");
  State s = x;
  double value = 1.0;  // gamma^N accumulated multiplicatively
  for (std::size_t t = 0; t < T_max; ++t) {
    if (cost_signal(spec, s) > 0) return value;
    value *= gamma;
    if (t + 1 < T_max) s = step(spec, s, clamp(spec, pi(spec, s)));
  }
  return 0.0;  // no violation within the truncation horizon
}

std::shared_ptr<TabularField> risky_backup(const SystemSpec& spec, const BackupRule& rule,
                                           const TabularField& F, BackupDiag* diag) {
  if (!(rule.gamma > 0 && rule.gamma < 1)) throw ModelError("risky_backup: gamma must be in (0,1)");
  const StateGrid& grid = F.grid;
  std::vector<double> out(F.values.size());
  const long clamps_before = F.hull_clamps.load();
  const std::size_t total = grid.total();
  for (std::size_t i = 0; i < total; ++i) {
    const State x = grid.node(i);
    double backed;
    if (rule.policy) {
      const State xn = step(spec, x, clamp(spec, (*rule.policy)(spec, x)));
      backed = apply_backup(rule, spec, x, F.value(xn));
    } else {
      double best = std::numeric_limits<double>::infinity();
      const int L = rule.action_lattice;
      // uniform lattice over the action box, exhaustive for 1-D/2-D actions
      if (spec.action_dim == 1) {
        for (int k = 0; k < L; ++k) {
          Action u = Action::zeros(1);
          u[0] = spec.action_lower[0] +
                 (spec.action_upper[0] - spec.action_lower[0]) * k / static_cast<double>(L - 1);
          best = std::min(best, F.value(step(spec, x, u)));
        }
      } else {
        for (int k0 = 0; k0 < L; ++k0)
          for (int k1 = 0; k1 < L; ++k1) {
            Action u = Action::zeros(2);
            u[0] = spec.action_lower[0] + (spec.action_upper[0] - spec.action_lower[0]) * k0 /
                                              static_cast<double>(L - 1);
            u[1] = spec.action_lower[1] + (spec.action_upper[1] - spec.action_lower[1]) * k1 /
                                              static_cast<double>(L - 1);
            best = std::min(best, F.value(step(spec, x, u)));
          }
      }
      backed = apply_backup(rule, spec, x, best);
    }
    out[i] = backed;
  }
  if (diag) diag->hull_clamps += F.hull_clamps.load() - clamps_before;
  return std::make_shared<TabularField>(grid, std::move(out));
}

FixedPointResult fixed_point_solve(const SystemSpec& spec, const BackupRule& rule,
                                   const StateGrid& grid, double tol, std::size_t max_iters,
                                   int jobs) {
  if (tol <= 0) throw ModelError("fixed_point_solve: tol must be > 0");
  FixedPointResult res;
  auto cur = std::make_shared<TabularField>(grid, std::vector<double>(grid.total(), 0.0));

  // precompute successor states (policy variant) or keep lattice per-node (optimal variant)
  const std::size_t total = grid.total();
  std::vector<State> nodes(total);
  for (std::size_t i = 0; i < total; ++i) nodes[i] = grid.node(i);

  std::vector<State> succ;  // policy variant: one successor per node
  if (rule.policy) {
    succ.resize(total);
    parallel_for(jobs, total, [&](std::size_t i) {
      succ[i] = step(spec, nodes[i], clamp(spec, (*rule.policy)(spec, nodes[i])));
    });
  }

  std::vector<Action> lattice;
  if (!rule.policy) {
    const int L = rule.action_lattice;
    if (spec.action_dim == 1) {
      for (int k = 0; k < L; ++k) {
        Action u = Action::zeros(1);
        u[0] = spec.action_lower[0] +
               (spec.action_upper[0] - spec.action_lower[0]) * k / static_cast<double>(L - 1);
        lattice.push_back(u);
      }
    } else {
      for (int k0 = 0; k0 < L; ++k0)
        for (int k1 = 0; k1 < L; ++k1) {
          Action u = Action::zeros(2);
          u[0] = spec.action_lower[0] +
                 (spec.action_upper[0] - spec.action_lower[0]) * k0 / static_cast<double>(L - 1);
          u[1] = spec.action_lower[1] +
                 (spec.action_upper[1] - spec.action_lower[1]) * k1 / static_cast<double>(L - 1);
          lattice.push_back(u);
        }
    }
  }

  std::vector<double> next(total);
  for (std::size_t it = 0; it < max_iters; ++it) {
    const TabularField& F = *cur;
    parallel_for(jobs, total, [&](std::size_t i) {
      double backed;
      if (rule.policy) {
        backed = apply_backup(rule, spec, nodes[i], F.value(succ[i]));
      } else {
        double best = std::numeric_limits<double>::infinity();
        for (const Action& u : lattice) best = std::min(best, F.value(step(spec, nodes[i], u)));
        backed = apply_backup(rule, spec, nodes[i], best);
      }
      next[i] = backed;
    });
    double delta = 0;
    for (std::size_t i = 0; i < total; ++i) delta = std::max(delta, std::abs(next[i] - F.values[i]));
    res.hull_clamps = cur->hull_clamps.load();
    auto fresh = std::make_shared<TabularField>(grid, next);
    fresh->hull_clamps.store(res.hull_clamps);
    cur = std::move(fresh);
    res.residuals.push_back(delta);
    res.iterations = it + 1;
    res.residual = delta;
    if (delta < tol) {
      res.field = cur;
      return res;
    }
  }
  throw NonConvergence(res.residual, res.iterations);
}

StateGrid extended_braking_grid(const StateGrid& grid, double margin) {
  StateGrid g = grid;
  const double res = grid.step_size(0);
  const int extra = static_cast<int>(std::ceil(margin / res));
  g.lower[0] = grid.lower[0] - extra * res;
  g.count[0] = grid.count[0] + extra;
  return g;
}

double self_consistency_residual(const SystemSpec& spec, const BackupRule& rule,
                                 const FeasibilityField& F, std::span<const State> samples) {
  double worst = 0;
  for (const State& x : samples) {
    double f_next;
    if (rule.policy) {
      f_next = F.value(step(spec, x, clamp(spec, (*rule.policy)(spec, x))));
    } else {
      double best = std::numeric_limits<double>::infinity();
      const int L = rule.action_lattice;
      for (int k = 0; k < L; ++k) {
        Action u = Action::zeros(spec.action_dim);
        u[0] = spec.action_lower[0] +
               (spec.action_upper[0] - spec.action_lower[0]) * k / static_cast<double>(L - 1);
        if (spec.action_dim == 1) {
          best = std::min(best, F.value(step(spec, x, u)));
        } else {
          for (int k1 = 0; k1 < L; ++k1) {
            u[1] = spec.action_lower[1] +
                   (spec.action_upper[1] - spec.action_lower[1]) * k1 / static_cast<double>(L - 1);
            best = std::min(best, F.value(step(spec, x, u)));
          }
        }
      }
      f_next = best;
    }
    worst = std::max(worst, std::abs(F.value(x) - apply_backup(rule, spec, x, f_next)));
  }
  return worst;
}

}  // namespace feasreg
