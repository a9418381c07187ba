#include "feasreg/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "feasreg/io.hpp"

namespace feasreg {

std::string family_name(ConstraintFamily f) {
  switch (f) {
    case ConstraintFamily::Pointwise: return "pointwise";
    case ConstraintFamily::CBF: return "cbf";
    case ConstraintFamily::SI: return "si";
    case ConstraintFamily::HJR: return "hjr";
    case ConstraintFamily::CVF: return "cvf";
    case ConstraintFamily::CDF: return "cdf";
  }
  return "?";
}

int VirtualTimeConstraint::num_residuals() const {
  switch (family) {
    case ConstraintFamily::Pointwise: return n + 1;
    case ConstraintFamily::CBF:
    case ConstraintFamily::SI: return 2;
    default: return mode == FieldMode::FirstStep ? 1 : 2;
  }
}

int VirtualTimeConstraint::dep(int r) const {
  if (family == ConstraintFamily::Pointwise) return r;
  return r;  // two-step families: residual 0 -> x_0, residual 1 -> x_1
}

void VirtualTimeConstraint::residuals(const SystemSpec& spec, std::span<const State> states,
                                      double* out) const {
  switch (family) {
    case ConstraintFamily::Pointwise:
      for (int i = 0; i <= n; ++i) out[i] = spec.h(states[static_cast<size_t>(i)]);
      return;
    case ConstraintFamily::CBF: {
      const double b0 = field->value(states[0]);
      out[0] = b0;
      out[1] = field->value(states[1]) - (1.0 - alpha_rate) * b0;
      return;
    }
    case ConstraintFamily::SI: {
      const double phi0 = field->value(states[0]);
      out[0] = std::max(phi0, spec.h(states[0]));
      out[1] = field->value(states[1]) - std::max(phi0 - si.eta, 0.0);
      return;
    }
    default: {
      out[0] = field->value(states[0]);
      if (mode == FieldMode::TwoStep) out[1] = field->value(states[1]);
      return;
    }
  }
}

double VirtualTimeConstraint::residual_at(const SystemSpec& spec, std::span<const State> states,
                                          int r) const {
  switch (family) {
    case ConstraintFamily::Pointwise:
      return spec.h(states[static_cast<size_t>(r)]);
    case ConstraintFamily::CBF:
      if (r == 0) return field->value(states[0]);
      return field->value(states[1]) - (1.0 - alpha_rate) * field->value(states[0]);
    case ConstraintFamily::SI:
      if (r == 0) return std::max(field->value(states[0]), spec.h(states[0]));
      return field->value(states[1]) - std::max(field->value(states[0]) - si.eta, 0.0);
    default:
      return field->value(states[static_cast<size_t>(r)]);
  }
}

Vec VirtualTimeConstraint::residual_grad(const SystemSpec& spec, std::span<const State> states,
                                         int r) const {
  const State& x = states[static_cast<size_t>(dep(r))];
  switch (family) {
    case ConstraintFamily::Pointwise: {
      if (spec.kind == SystemKind::Braking) return Vec{-1.0, 0.0};
      const double d = std::sqrt(x[0] * x[0] + x[1] * x[1]);
      Vec g = Vec::zeros(spec.state_dim);
      if (d > 1e-12) {
        g[0] = -x[0] / d;
        g[1] = -x[1] / d;
      }
      return g;
    }
    case ConstraintFamily::CBF:
      return field->grad(x);  // residual 1 sees x_0 only through the constant B(x_0)
    case ConstraintFamily::SI: {
      if (r == 1) return field->grad(x);
      // subgradient of max{phi, h} at x_0 (constant for the solver anyway)
      const double phi0 = field->value(x);
      if (phi0 >= spec.h(x)) return field->grad(x);
      if (spec.kind == SystemKind::Braking) return Vec{-1.0, 0.0};
      return Vec::zeros(spec.state_dim);
    }
    default:
      return field->grad(x);
  }
}

double VirtualTimeConstraint::max_violation(const SystemSpec& spec,
                                            std::span<const State> states) const {
  double buf[16];
  const int m = num_residuals();
  residuals(spec, states, buf);
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) worst = std::max(worst, buf[i]);
  return worst;
}

std::string VirtualTimeConstraint::describe() const {
  std::string s = family_name(family);
  switch (family) {
    case ConstraintFamily::Pointwise: return s + "(n=" + std::to_string(n) + ")";
    case ConstraintFamily::CBF: return s + "(alpha=" + fmt_g(alpha_rate) + "," + field->describe() + ")";
    case ConstraintFamily::SI:
      return s + "(sigma=" + fmt_g(si.sigma) + ",n=" + fmt_g(si.n_exp) + ",k=" + fmt_g(si.k) +
             ",eta=" + fmt_g(si.eta) + ")";
    default:
      return s + "(" + (mode == FieldMode::FirstStep ? "first_step" : "two_step") + "," +
             field->describe() + ")";
  }
}

VirtualTimeConstraint make_pointwise(int n) {
  if (n < 0) throw ModelError("make_pointwise: n must be >= 0");
  VirtualTimeConstraint g;
  g.family = ConstraintFamily::Pointwise;
  g.n = n;
  return g;
}

VirtualTimeConstraint make_cbf_constraint(FieldPtr B, double alpha_rate) {
  if (alpha_rate <= 0.0 || alpha_rate > 1.0)
    throw ModelError("make_cbf_constraint: alpha_rate must be in (0, 1]");
  VirtualTimeConstraint g;
  g.family = ConstraintFamily::CBF;
  g.n = 1;
  g.field = std::move(B);
  g.alpha_rate = alpha_rate;
  return g;
}

VirtualTimeConstraint make_si_constraint(const SiParams& p) {
  if (p.n_exp <= 0 || p.k <= 0) throw ModelError("make_si_constraint: need n_exp > 0 and k > 0");
  VirtualTimeConstraint g;
  g.family = ConstraintFamily::SI;
  g.n = 1;
  g.si = p;
  g.field = si_phi_braking(p.sigma, p.d_min, p.n_exp, p.k);
  return g;
}

VirtualTimeConstraint make_field_constraint(FieldPtr F, FieldMode mode, ConstraintFamily family) {
  VirtualTimeConstraint g;
  g.family = family;
  g.mode = mode;
  g.n = mode == FieldMode::FirstStep ? 0 : 1;
  g.field = std::move(F);
  return g;
}

bool si_design_rule_check(const SiParams& p, double v_max, double a_brk) {
  if (v_max <= 0 || a_brk >= 0) throw ModelError("si_design_rule_check: need v_max > 0, a_brk < 0");
  const double base = p.sigma + std::pow(p.d_min, p.n_exp) + p.k * v_max;
  const double lhs = p.n_exp * std::pow(base, (p.n_exp - 1.0) / p.n_exp) / p.k;
  return lhs <= -a_brk / v_max;
}

NotWeakerReport check_not_weaker(const VirtualTimeConstraint& g, const SystemSpec& spec,
                                 std::span<const State> samples) {
  if (samples.empty()) throw ModelError("check_not_weaker: empty sample set");
  NotWeakerReport rep;
  rep.checked = samples.size();
  double buf[16];
  for (const State& x : samples) {
    const State states[2] = {x, x};  // g0 only reads states[0]
    g.residuals(spec, std::span<const State>(states, 2), buf);
    if (buf[0] <= kFeasTol && spec.h(x) > kFeasTol) {
      if (rep.counterexamples.size() < 100) rep.counterexamples.push_back(x);
    }
  }
  return rep;
}

}  // namespace feasreg
