#include "feasreg/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace feasreg {

Batch sample_batch(const StateGrid& hull, int n, Rng& rng) {
  Batch b;
  b.x.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    State x = State::zeros(hull.dim);
    for (int d = 0; d < hull.dim; ++d)
      x[d] = rng.uniform(hull.lower[static_cast<size_t>(d)], hull.upper[static_cast<size_t>(d)]);
    b.x.push_back(x);
  }
  return b;
}

Policy mlp_policy(const SystemSpec& spec, const Mlp& net, const std::string& name) {
  Policy p;
  p.name = name;
  auto shared = std::make_shared<Mlp>(net);
  p.act = [shared](const SystemSpec& s, const State& x) {
    double z[2], u[2];
    shared->forward(x.a.data(), z);
    squash_action(z, s.action_lower, s.action_upper, s.action_dim, u);
    Action out = Action::zeros(s.action_dim);
    for (int a = 0; a < s.action_dim; ++a) out[a] = u[a];
    return ActResult{out, true};
  };
  return p;
}

namespace {

struct MlpField final : FeasibilityField {
  Mlp net;
  explicit MlpField(Mlp n) : net(std::move(n)) {}
  double value(const State& x) const override {
    double out;
    net.forward(x.a.data(), &out);
    return out;
  }
  Vec grad(const State& x) const override {
    double din[4];
    mlp_input_grad(net, x.a.data(), 0, din);
    Vec g = Vec::zeros(net.input_dim());
    for (int i = 0; i < net.input_dim(); ++i) g[i] = din[i];
    return g;
  }
  std::string describe() const override { return "mlp_field"; }
};

// policy net evaluation: z -> squashed action
inline void policy_action(const SystemSpec& spec, const Mlp& policy, const State& x, double* z,
                          double* u) {
  policy.forward(x.a.data(), z);
  squash_action(z, spec.action_lower, spec.action_upper, spec.action_dim, u);
}

}  // namespace

FieldPtr mlp_field(const Mlp& net) { return std::make_shared<MlpField>(net); }

double value_loss(const SystemSpec& spec, const Mlp& value, const Mlp& policy, const Batch& batch,
                  double gamma, MlpGrads* grads) {
  if (batch.x.empty()) throw ModelError("value_loss: empty batch");
  const double invB = 1.0 / static_cast<double>(batch.x.size());
  double loss = 0;
  MlpTape tape;
  double z[2], u[2];
  for (const State& x : batch.x) {
    policy_action(spec, policy, x, z, u);
    Action act = Action::zeros(spec.action_dim);
    for (int a = 0; a < spec.action_dim; ++a) act[a] = u[a];
    const State xn = step(spec, x, act);
    double vnext;
    value.forward(xn.a.data(), &vnext);
    const double target = spec.reward(x, act) + gamma * vnext;  // constant w.r.t. parameters
    mlp_forward_tape(value, x.a.data(), tape);
    const double pred = tape.act.back()[0];
    const double err = pred - target;
    loss += err * err * invB;
    if (grads) {
      const double dout = 2.0 * err * invB;
      mlp_backward(value, tape, &dout, grads, nullptr);
    }
  }
  return loss;
}

double policy_loss(const SystemSpec& spec, const Mlp& policy, const Mlp& value,
                   const FeasibilityField& indicator_field, const FeasibilityField& out_field,
                   const Batch& batch, double gamma, MlpGrads* grads) {
  if (batch.x.empty()) throw ModelError("policy_loss: empty batch");
  const double invB = 1.0 / static_cast<double>(batch.x.size());
  double loss = 0;
  MlpTape tape;
  double fx[4][4], fu[4][2];
  for (const State& x : batch.x) {
    mlp_forward_tape(policy, x.a.data(), tape);
    double z[2], u[2], dudz[2];
    for (int a = 0; a < spec.action_dim; ++a) z[a] = tape.act.back()[static_cast<size_t>(a)];
    squash_action(z, spec.action_lower, spec.action_upper, spec.action_dim, u);
    squash_jac(z, spec.action_lower, spec.action_upper, spec.action_dim, dudz);
    Action act = Action::zeros(spec.action_dim);
    for (int a = 0; a < spec.action_dim; ++a) act[a] = u[a];
    const State xn = step(spec, x, act);
    const bool inside = indicator_field.value(x) <= 0.0;  // frozen region indicator

    double term;
    double dterm_du[2] = {0, 0};
    step_jacobians(spec, x, act, fx, fu);
    if (inside) {
      double vnext;
      value.forward(xn.a.data(), &vnext);
      term = -(spec.reward(x, act) + gamma * vnext);
      // d(-r)/du
      if (spec.kind == SystemKind::Braking) dterm_du[0] += 2.0 * act[0];
      // -gamma dV/dx' * dx'/du (value parameters frozen)
      double dvdx[4];
      mlp_input_grad(value, xn.a.data(), 0, dvdx);
      for (int a = 0; a < spec.action_dim; ++a)
        for (int d = 0; d < spec.state_dim; ++d) dterm_du[a] -= gamma * dvdx[d] * fu[d][a];
    } else {
      term = out_field.value(xn);
      const Vec df = out_field.grad(xn);
      for (int a = 0; a < spec.action_dim; ++a)
        for (int d = 0; d < spec.state_dim; ++d) dterm_du[a] += df[d] * fu[d][a];
    }
    loss += term * invB;
    if (grads) {
      double dz[2];
      for (int a = 0; a < spec.action_dim; ++a) dz[a] = dterm_du[a] * dudz[a] * invB;
      mlp_backward(policy, tape, dz, grads, nullptr);
    }
  }
  return loss;
}

double field_loss(const SystemSpec& spec, const Mlp& field, const Mlp& field_target,
                  const Mlp& policy, const Batch& batch, double gamma, MlpGrads* grads) {
  if (batch.x.empty()) throw ModelError("field_loss: empty batch");
  const double invB = 1.0 / static_cast<double>(batch.x.size());
  double loss = 0;
  MlpTape tape;
  double z[2], u[2];
  for (const State& x : batch.x) {
    policy_action(spec, policy, x, z, u);
    Action act = Action::zeros(spec.action_dim);
    for (int a = 0; a < spec.action_dim; ++a) act[a] = u[a];
    const State xn = step(spec, x, act);
    double ftgt;
    field_target.forward(xn.a.data(), &ftgt);
    const double hx = spec.h(x);
    const double target = (1.0 - gamma) * hx + gamma * std::max(hx, ftgt);
    mlp_forward_tape(field, x.a.data(), tape);
    const double pred = tape.act.back()[0];
    const double err = pred - target;
    loss += err * err * invB;
    if (grads) {
      const double dout = 2.0 * err * invB;
      mlp_backward(field, tape, &dout, grads, nullptr);
    }
  }
  return loss;
}

TrainResult train(const TrainerConfig& cfg, const SystemSpec& spec,
                  const VirtualTimeConstraint& g, const StateGrid& hull) {
  if (cfg.lr <= 0 || cfg.batch < 1) throw ModelError("train: bad config");
  TrainResult res;

  Rng init_rng(mix_seed(cfg.seed, 0x11));
  std::vector<int> psizes = {spec.state_dim, cfg.hidden, cfg.hidden, spec.action_dim};
  std::vector<int> vsizes = {spec.state_dim, cfg.hidden, cfg.hidden, 1};
  Mlp policy = Mlp::make(psizes, init_rng);
  Mlp value = Mlp::make(vsizes, init_rng);
  Mlp field_net = Mlp::make(vsizes, init_rng);
  // scale raw states into [-1, 1] before the first layer
  for (int d = 0; d < hull.dim; ++d) {
    const auto s = static_cast<size_t>(d);
    const double mid = 0.5 * (hull.lower[s] + hull.upper[s]);
    const double half = 0.5 * (hull.upper[s] - hull.lower[s]);
    for (Mlp* net : {&policy, &value, &field_net}) {
      net->in_offset[s] = mid;
      net->in_scale[s] = 1.0 / half;
    }
  }
  Mlp field_target = field_net;

  FieldPtr static_field = g.field ? g.field : h_field(spec);

  auto snapshot = [&](long it) {
    Checkpoint c;
    c.iteration = it;
    c.seed = cfg.seed;
    c.policy = policy;
    c.value = value;
    if (cfg.learned_field) c.extra.push_back(field_net);
    res.checkpoints.push_back(std::move(c));
  };

  if (cfg.iterations == 0) {
    snapshot(0);
    return res;
  }

  Rng rng(mix_seed(cfg.seed, 0x22));
  Adam opt_v(value, cfg.lr), opt_p(policy, cfg.lr), opt_f(field_net, cfg.lr);
  MlpGrads gv(value), gp(policy), gf(field_net);

  for (long it = 1; it <= cfg.iterations; ++it) {
    Batch batch = sample_batch(hull, cfg.batch, rng);

    gv.zero();
    const double lv = value_loss(spec, value, policy, batch, cfg.gamma, &gv);
    opt_v.update(value, gv);

    if (cfg.learned_field) {
      gf.zero();
      field_loss(spec, field_net, field_target, policy, batch, cfg.field_gamma, &gf);
      opt_f.update(field_net, gf);
      if (it % cfg.target_sync == 0) field_target = field_net;
    }

    double lp;
    {
      gp.zero();
      if (cfg.learned_field) {
        MlpField live(field_net);
        lp = policy_loss(spec, policy, value, live, live, batch, cfg.gamma, &gp);
      } else {
        lp = policy_loss(spec, policy, value, *static_field, *static_field, batch, cfg.gamma, &gp);
      }
      opt_p.update(policy, gp);
    }

    if (!std::isfinite(lv) || !std::isfinite(lp))
      throw TrainingDiverged(it, "non-finite loss (value=" + std::to_string(lv) +
                                     ", policy=" + std::to_string(lp) + ")");
    if (it % 100 == 0 || it == 1) {
      res.value_losses.push_back(lv);
      res.policy_losses.push_back(lp);
    }
    if (std::find(cfg.checkpoint_iters.begin(), cfg.checkpoint_iters.end(), it) !=
        cfg.checkpoint_iters.end())
      snapshot(it);
  }
  if (res.checkpoints.empty() ||
      res.checkpoints.back().iteration != cfg.iterations)
    snapshot(cfg.iterations);
  return res;
}

}  // namespace feasreg
