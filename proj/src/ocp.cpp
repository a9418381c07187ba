#include "feasreg/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace feasreg {

namespace {

constexpr int kMaxN = 16;    // horizon cap (N = 10 in the benchmarks)
constexpr int kMaxRes = 20;  // residual cap (pointwise n = 10 -> 11)
constexpr int kMaxU = kMaxN * 2;

// Flat action sequence, [step * action_dim + axis].
struct Seq {
  std::array<double, kMaxU> u{};
  int len = 0;  // N * action_dim
};

struct EvalOut {
  double objective = 0;
  double max_violation = 0;
  double norm2 = 0;
};

struct Candidate {
  Seq seq;
  EvalOut ev;
};

// feasible beats infeasible; then objective (desc), then action norm (asc);
// infeasible ranked by violation (asc)
bool better(const Candidate& a, const Candidate& b, double tol) {
  const bool fa = a.ev.max_violation <= tol, fb = b.ev.max_violation <= tol;
  if (fa != fb) return fa;
  if (fa) {
    if (std::abs(a.ev.objective - b.ev.objective) > 1e-12) return a.ev.objective > b.ev.objective;
    return a.ev.norm2 < b.ev.norm2;
  }
  if (a.ev.max_violation != b.ev.max_violation) return a.ev.max_violation < b.ev.max_violation;
  return a.ev.objective > b.ev.objective;
}

class Solver {
 public:
  Solver(const SystemSpec& spec, const VirtualTimeConstraint& g, const State& x0, int n_actions,
         double gamma_obj, bool with_objective, const SolverParams& prm)
      : spec_(spec),
        g_(g),
        x0_(x0),
        N_(n_actions),
        m_(spec.action_dim),
        gamma_obj_(gamma_obj),
        with_objective_(with_objective),
        prm_(prm) {
    nres_ = g.num_residuals();
    if (N_ > kMaxN) throw ModelError("solve_ocp: horizon exceeds solver cap");
    if (nres_ > kMaxRes) throw ModelError("solve_ocp: too many residuals");
    for (int a = 0; a < m_; ++a) {
      lo_[a] = spec.action_lower[a];
      hi_[a] = spec.action_upper[a];
      range_[a] = hi_[a] - lo_[a];
    }
    // discount powers
    double d = 1;
    for (int k = 0; k < N_; ++k) {
      disc_[k] = d;
      d *= gamma_obj_;
    }
  }

  long iterations = 0;
  int restarts_used = 0;

  EvalOut evaluate(const Seq& s) {
    forward(s);
    EvalOut out;
    out.objective = obj_;
    out.max_violation = maxviol_;
    for (int i = 0; i < s.len; ++i) out.norm2 += s.u[static_cast<size_t>(i)] * s.u[static_cast<size_t>(i)];
    return out;
  }

  Candidate run() {
    Candidate best;
    best.seq = const_seq(0.0);
    best.ev = evaluate(best.seq);
    // braking objective r = -a^2 peaks at zero effort: a feasible zero
    // sequence is globally optimal and minimum-norm
    if (with_objective_ && spec_.kind == SystemKind::Braking &&
        best.ev.max_violation <= prm_.feas_tol)
      return best;

    // in feasibility mode any point within tolerance settles the question
    auto done = [&]() { return !with_objective_ && best.ev.max_violation <= prm_.feas_tol; };

    auto consider = [&](const Seq& s) {
      Candidate c{s, evaluate(s)};
      if (better(c, best, prm_.feas_tol)) best = c;
    };

    // corner / constant-level candidates
    if (!(with_objective_ && spec_.kind == SystemKind::Braking)) consider(const_seq(0.0));
    if (done()) return best;
    for (int a = 0; a < lattice_count(); ++a) {
      consider(const_combo(a));
      if (done()) return best;
    }

    // coarse lattice beam search
    beam_search(consider);
    if (done()) return best;

    // gradient refinement from the incumbent plus seeded random restarts
    refine(best.seq, consider);
    if (done()) return best;
    Rng rng(prm_.seed);
    for (int rs = 0; rs < prm_.restarts; ++rs) {
      Seq s;
      s.len = N_ * m_;
      for (int k = 0; k < N_; ++k)
        for (int a = 0; a < m_; ++a)
          s.u[static_cast<size_t>(k * m_ + a)] = rng.uniform(lo_[a], hi_[a]);
      ++restarts_used;
      refine(s, consider);
      if (done()) return best;
    }
    return best;
  }

 private:
  const SystemSpec& spec_;
  const VirtualTimeConstraint& g_;
  State x0_;
  int N_, m_;
  double gamma_obj_;
  bool with_objective_;
  SolverParams prm_;
  int nres_ = 0;

  double lo_[2]{}, hi_[2]{}, range_[2]{};
  double disc_[kMaxN]{};

  // forward pass buffers
  State states_[kMaxN + 1];
  double resid_[kMaxRes];
  double obj_ = 0, maxviol_ = 0;

  void forward(const Seq& s) {
    states_[0] = x0_;
    obj_ = 0;
    for (int k = 0; k < N_; ++k) {
      Action u = Action::zeros(m_);
      for (int a = 0; a < m_; ++a) u[a] = s.u[static_cast<size_t>(k * m_ + a)];
      if (with_objective_) obj_ += disc_[k] * spec_.reward(states_[k], u);
      states_[k + 1] = step(spec_, states_[k], u);
    }
    g_.residuals(spec_, std::span<const State>(states_, static_cast<size_t>(N_ + 1)), resid_);
    maxviol_ = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < nres_; ++i) maxviol_ = std::max(maxviol_, resid_[i]);
  }

  Seq const_seq(double v) const {
    Seq s;
    s.len = N_ * m_;
    for (int i = 0; i < s.len; ++i) s.u[static_cast<size_t>(i)] = v;
    return s;
  }
  int lattice_count() const {
    int c = prm_.lattice_levels;
    return m_ == 1 ? c : c * c;
  }
  void lattice_action(int combo, double* out) const {
    const int L = prm_.lattice_levels;
    for (int a = 0; a < m_; ++a) {
      const int idx = (a == 0) ? combo % L : combo / L;
      out[a] = lo_[a] + range_[a] * idx / static_cast<double>(L - 1);
    }
  }
  Seq const_combo(int combo) const {
    double u[2];
    lattice_action(combo, u);
    Seq s;
    s.len = N_ * m_;
    for (int k = 0; k < N_; ++k)
      for (int a = 0; a < m_; ++a) s.u[static_cast<size_t>(k * m_ + a)] = u[a];
    return s;
  }

  struct BeamEntry {
    Seq seq;
    State x;         // state after the prefix
    double obj = 0;  // partial objective
    double viol = -std::numeric_limits<double>::infinity();
    State x0;  // needed for residuals that also read x_0
  };

  void beam_search(const std::function<void(const Seq&)>& consider) {
    const int W = prm_.beam_width;
    if (W <= 0) return;
    std::vector<BeamEntry> beam, next;
    BeamEntry root;
    root.seq.len = N_ * m_;
    root.x = x0_;
    root.x0 = x0_;
    // residuals with dep 0 are prefix-independent
    for (int r = 0; r < nres_; ++r)
      if (g_.dep(r) == 0) {
        const State pair[1] = {x0_};
        root.viol = std::max(root.viol, g_.residual_at(spec_, std::span<const State>(pair, 1), r));
      }
    beam.push_back(root);
    double ucombo[2];
    for (int k = 0; k < N_; ++k) {
      next.clear();
      for (const BeamEntry& e : beam) {
        for (int c = 0; c < lattice_count(); ++c) {
          lattice_action(c, ucombo);
          BeamEntry child = e;
          Action u = Action::zeros(m_);
          for (int a = 0; a < m_; ++a) {
            u[a] = ucombo[a];
            child.seq.u[static_cast<size_t>(k * m_ + a)] = ucombo[a];
          }
          if (with_objective_) child.obj += disc_[k] * spec_.reward(e.x, u);
          child.x = step(spec_, e.x, u);
          for (int r = 0; r < nres_; ++r)
            if (g_.dep(r) == k + 1) {
              const State pair[2] = {child.x0, child.x};
              // residual depends on x_{k+1} (and possibly the constant x_0);
              // pointwise residual r is h(x_r), which only reads the last state
              double val;
              if (g_.family == ConstraintFamily::Pointwise)
                val = spec_.h(child.x);
              else
                val = g_.residual_at(spec_, std::span<const State>(pair, 2), r);
              child.viol = std::max(child.viol, val);
            }
          next.push_back(child);
        }
      }
      std::sort(next.begin(), next.end(), [](const BeamEntry& a, const BeamEntry& b) {
        const double va = std::max(a.viol, 0.0), vb = std::max(b.viol, 0.0);
        if (va != vb) return va < vb;
        if (a.obj != b.obj) return a.obj > b.obj;
        return std::lexicographical_compare(a.seq.u.begin(), a.seq.u.begin() + a.seq.len,
                                            b.seq.u.begin(), b.seq.u.begin() + b.seq.len);
      });
      if (static_cast<int>(next.size()) > W) next.resize(static_cast<size_t>(W));
      beam = next;
    }
    for (const BeamEntry& e : beam) consider(e.seq);
  }

  // ---- gradient stage ----

  // cost pieces: cobj_k weight on r(x_k, u_k); wres_r weight on residual r
  double penalized_cost(const Seq& s, const double* lam, double mu, double* grad) {
    forward(s);
    double cost = with_objective_ ? -obj_ : 0.0;
    double wres[kMaxRes];
    if (lam) {  // augmented Lagrangian weights
      for (int r = 0; r < nres_; ++r) {
        const double t = std::max(0.0, lam[r] + mu * resid_[r]);
        cost += (t * t - lam[r] * lam[r]) / (2.0 * mu);
        wres[r] = t;
      }
    } else {  // smoothed Chebyshev max, mu doubles as the sharpness beta
      double mx = maxviol_;
      double z = 0;
      for (int r = 0; r < nres_; ++r) z += std::exp(mu * (resid_[r] - mx));
      cost += mx + std::log(z) / mu;
      for (int r = 0; r < nres_; ++r) wres[r] = std::exp(mu * (resid_[r] - mx)) / z;
    }
    if (grad) backward(s, lam ? wres : wres, grad);
    return cost;
  }

  void backward(const Seq& s, const double* wres, double* grad) {
    // adjoint through the rollout: lambda_k = dC/dx_k accumulated backwards
    double lam_x[kMaxN + 1][4];
    std::memset(lam_x, 0, sizeof(lam_x));
    for (int r = 0; r < nres_; ++r) {
      const int dep = g_.dep(r);
      if (dep == 0 || wres[r] == 0.0) continue;  // x_0 is fixed
      const Vec gr = g_.residual_grad(
          spec_, std::span<const State>(states_, static_cast<size_t>(N_ + 1)), r);
      for (int d = 0; d < spec_.state_dim; ++d) lam_x[dep][d] += wres[r] * gr[d];
    }
    double fx[4][4], fu[4][2];
    for (int k = N_ - 1; k >= 0; --k) {
      Action u = Action::zeros(m_);
      for (int a = 0; a < m_; ++a) u[a] = s.u[static_cast<size_t>(k * m_ + a)];
      // reward partials (cost = -obj)
      if (with_objective_) {
        if (spec_.kind == SystemKind::Braking) {
          grad[k * m_] = disc_[k] * 2.0 * u[0];  // d(-(-a^2))/da
        } else {
          grad[k * m_] = 0;
          grad[k * m_ + 1] = 0;
          lam_x[k][1] += -disc_[k];  // reward z: d(-z)/dz
        }
      } else {
        for (int a = 0; a < m_; ++a) grad[k * m_ + a] = 0;
      }
      step_jacobians(spec_, states_[k], u, fx, fu);
      for (int a = 0; a < m_; ++a)
        for (int d = 0; d < spec_.state_dim; ++d) grad[k * m_ + a] += fu[d][a] * lam_x[k + 1][d];
      for (int d = 0; d < spec_.state_dim; ++d) {
        double acc = lam_x[k][d];
        for (int d2 = 0; d2 < spec_.state_dim; ++d2) acc += fx[d2][d] * lam_x[k + 1][d2];
        lam_x[k][d] = acc;
      }
    }
  }

  void project(Seq& s) const {
    for (int k = 0; k < N_; ++k)
      for (int a = 0; a < m_; ++a) {
        double& v = s.u[static_cast<size_t>(k * m_ + a)];
        v = std::min(hi_[a], std::max(lo_[a], v));
      }
  }

  // projected-gradient descent on the given cost; returns final cost
  double pgd(Seq& s, const double* lam, double mu) {
    double grad[kMaxU];
    double cost = penalized_cost(s, lam, mu, grad);
    for (int it = 0; it < prm_.max_inner_iters; ++it) {
      ++iterations;
      double alpha = 0.5;
      bool improved = false;
      for (int bt = 0; bt < 24; ++bt) {
        Seq trial = s;
        for (int k = 0; k < N_; ++k)
          for (int a = 0; a < m_; ++a) {
            const int i = k * m_ + a;
            trial.u[static_cast<size_t>(i)] -= alpha * range_[a] * range_[a] * grad[i];
          }
        project(trial);
        const double tc = penalized_cost(trial, lam, mu, nullptr);
        if (tc < cost - 1e-14) {
          s = trial;
          cost = tc;
          improved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!improved) break;
      cost = penalized_cost(s, lam, mu, grad);
    }
    return cost;
  }

  void refine(Seq s, const std::function<void(const Seq&)>& consider) {
    project(s);
    if (with_objective_) {
      double lam[kMaxRes];
      std::fill(lam, lam + nres_, 0.0);
      double mu = prm_.penalty_init;
      for (int round = 0; round < prm_.outer_rounds; ++round) {
        pgd(s, lam, mu);
        forward(s);
        for (int r = 0; r < nres_; ++r) lam[r] = std::max(0.0, lam[r] + mu * resid_[r]);
        mu *= prm_.penalty_mult;
        consider(s);
      }
    } else {
      // Chebyshev: sharpen the smoothed max across rounds
      double beta = 10.0;
      for (int round = 0; round < prm_.outer_rounds; ++round) {
        pgd(s, nullptr, beta);
        beta *= 100.0;
        consider(s);
        forward(s);
        if (maxviol_ <= prm_.feas_tol) return;
      }
    }
  }
};

OcpSolution pack(const Candidate& c, const Solver& sv, int N, int m, double tol) {
  OcpSolution sol;
  sol.actions.reserve(static_cast<size_t>(N));
  for (int k = 0; k < N; ++k) {
    Action u = Action::zeros(m);
    for (int a = 0; a < m; ++a) u[a] = c.seq.u[static_cast<size_t>(k * m + a)];
    sol.actions.push_back(u);
  }
  sol.objective = c.ev.objective;
  sol.max_violation = c.ev.max_violation;
  sol.feasible = c.ev.max_violation <= tol;
  sol.iterations = sv.iterations;
  sol.restarts_used = sv.restarts_used;
  return sol;
}

}  // namespace

OcpSolution solve_ocp(const OcpSpec& p, const SolverParams& params) {
  if (!p.x0.finite()) throw ModelError("solve_ocp: x0 must be finite");
  if (p.g.n > p.N) throw ModelError("solve_ocp: constraint horizon exceeds objective horizon");
  Solver sv(p.spec, p.g, p.x0, p.N, p.gamma_obj, true, params);
  Candidate best = sv.run();
  return pack(best, sv, p.N, p.spec.action_dim, params.feas_tol);
}

OcpSolution solve_feasibility(const SystemSpec& spec, const VirtualTimeConstraint& g,
                              const State& x0, const SolverParams& params) {
  const int n_actions = std::max(g.n, 0);
  if (n_actions == 0) {
    // no decision: the single residual set is evaluated at x_0
    OcpSolution sol;
    const State pair[1] = {x0};
    double buf[kMaxRes];
    g.residuals(spec, std::span<const State>(pair, 1), buf);
    sol.max_violation = buf[0];
    for (int r = 1; r < g.num_residuals(); ++r) sol.max_violation = std::max(sol.max_violation, buf[r]);
    sol.feasible = sol.max_violation <= params.feas_tol;
    return sol;
  }
  Solver sv(spec, g, x0, n_actions, 1.0, false, params);
  Candidate best = sv.run();
  return pack(best, sv, n_actions, spec.action_dim, params.feas_tol);
}

bool is_initially_feasible_state(const SystemSpec& spec, const VirtualTimeConstraint& g,
                                 const State& x, const SolverParams& params) {
  return solve_feasibility(spec, g, x, params).feasible;
}

bool is_initially_feasible_policy(const SystemSpec& spec, const VirtualTimeConstraint& g,
                                  const Policy& pi, const State& x) {
  State states[kMaxRes + 1];
  states[0] = x;
  for (int k = 0; k < g.n; ++k)
    states[k + 1] = step(spec, states[k], clamp(spec, pi(spec, states[k])));
  return g.max_violation(spec, std::span<const State>(states, static_cast<size_t>(g.n + 1))) <=
         kFeasTol;
}

Policy mpc_policy(const OcpSpec& p_template, const SolverParams& params) {
  Policy pol;
  pol.name = "mpc[" + p_template.g.describe() + ",N=" + std::to_string(p_template.N) + "]";
  auto tmpl = std::make_shared<OcpSpec>(p_template);
  auto prm = std::make_shared<SolverParams>(params);
  pol.act = [tmpl, prm](const SystemSpec& spec, const State& x) {
    OcpSpec p = *tmpl;
    p.spec = spec;
    p.x0 = x;
    OcpSolution sol = solve_ocp(p, *prm);
    if (sol.feasible) return ActResult{sol.actions[0], true};
    // best-effort control: minimum-violation first action
    if (p.g.n >= 1) {
      OcpSolution fe = solve_feasibility(spec, p.g, x, *prm);
      if (!fe.actions.empty() && fe.max_violation <= sol.max_violation + kFeasTol)
        return ActResult{fe.actions[0], false};
    }
    return ActResult{sol.actions[0], false};
  };
  return pol;
}

}  // namespace feasreg
