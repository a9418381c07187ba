#pragma once

#include <span>
#include <string>
#include <vector>

#include "feasreg/field.hpp"

namespace feasreg {

enum class ConstraintFamily { Pointwise, CBF, SI, HJR, CVF, CDF };

std::string family_name(ConstraintFamily f);

enum class FieldMode { FirstStep, TwoStep };

struct SiParams {
  double sigma = 0.12;
  double d_min = 0.0;
  double n_exp = 0.5;
  double k = 0.23;
  double eta = 0.0;
};

/// Per-step inequality functions g(x_{i|t}) <= 0 over the first n virtual steps.
/// Evaluating residual r uses only states up to index dep(r); a residual's
/// dependence on x_0 is treated as constant by the OCP solver (x_0 is fixed).
struct VirtualTimeConstraint {
  ConstraintFamily family = ConstraintFamily::Pointwise;
  int n = 0;  // largest constrained virtual step index

  FieldPtr field;            // CBF: B, SI: phi, field families: F
  double alpha_rate = 0.1;   // CBF decrease rate
  SiParams si;               // SI parameters
  FieldMode mode = FieldMode::TwoStep;

  int num_residuals() const;
  // residual r depends on state x_{dep(r)}
  int dep(int r) const;
  // out must hold num_residuals() values; states must span x_0..x_n
  void residuals(const SystemSpec& spec, std::span<const State> states, double* out) const;
  // single residual; states must span x_0..x_{dep(r)}
  double residual_at(const SystemSpec& spec, std::span<const State> states, int r) const;
  // d residual_r / d x_{dep(r)}
  Vec residual_grad(const SystemSpec& spec, std::span<const State> states, int r) const;

  double max_violation(const SystemSpec& spec, std::span<const State> states) const;
  std::string describe() const;
};

VirtualTimeConstraint make_pointwise(int n);
VirtualTimeConstraint make_cbf_constraint(FieldPtr B, double alpha_rate);
VirtualTimeConstraint make_si_constraint(const SiParams& p);  // braking form of phi
VirtualTimeConstraint make_field_constraint(FieldPtr F, FieldMode mode,
                                            ConstraintFamily family = ConstraintFamily::HJR);

/// n (sigma + d_min^n + k v_max)^((n-1)/n) / k <= -a_brk / v_max
bool si_design_rule_check(const SiParams& p, double v_max, double a_brk);

struct NotWeakerReport {
  std::vector<State> counterexamples;  // g0(x) <= tol but h(x) > tol
  std::size_t checked = 0;
  bool ok() const { return counterexamples.empty(); }
};

NotWeakerReport check_not_weaker(const VirtualTimeConstraint& g, const SystemSpec& spec,
                                 std::span<const State> samples);

}  // namespace feasreg
