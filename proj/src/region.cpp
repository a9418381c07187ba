#include "feasreg/region.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include "feasreg/io.hpp"

namespace feasreg {

std::size_t RegionMap::count(FeasibilityLabel l) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
}
std::size_t RegionMap::count_initially() const {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](FeasibilityLabel l) { return is_initially(l); }));
}
std::size_t RegionMap::count_endless() const { return count(FeasibilityLabel::EndlesslyFeasible); }

void RegionMap::save_csv(const std::string& path) const {
  std::ostringstream out;
  out << "# feasreg region map v1\n";
  for (const auto& [k, v] : metadata) out << "# " << k << "=" << v << "\n";
  out << "# dim=" << grid.dim << "\n";
  for (int d = 0; d < grid.dim; ++d) {
    const auto s = static_cast<size_t>(d);
    out << "# axis" << d << "=" << fmt_g(grid.lower[s]) << "," << fmt_g(grid.upper[s]) << ","
        << grid.count[s] << "\n";
  }
  for (int d = 0; d < grid.dim; ++d) out << "axis" << d << ",";
  out << "label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const State x = grid.node(i);
    for (int d = 0; d < grid.dim; ++d) out << fmt_g(x[d]) << ",";
    out << static_cast<int>(labels[i]) << "\n";
  }
  write_file_atomic(path, out.str());
}

RegionMap RegionMap::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open region map: " + path);
  RegionMap map;
  std::string line;
  int axis_seen = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eq = line.find('=');
      if (line.rfind("# dim=", 0) == 0) {
        map.grid.dim = std::stoi(line.substr(eq + 1));
      } else if (line.rfind("# axis", 0) == 0 && eq != std::string::npos) {
        double lo, hi;
        int cnt;
        if (std::sscanf(line.c_str() + eq + 1, "%lf,%lf,%d", &lo, &hi, &cnt) != 3)
          throw ModelError("bad axis line in " + path);
        const auto s = static_cast<size_t>(axis_seen++);
        map.grid.lower[s] = lo;
        map.grid.upper[s] = hi;
        map.grid.count[s] = cnt;
      } else if (eq != std::string::npos && line.size() > 2) {
        map.metadata[line.substr(2, eq - 2)] = line.substr(eq + 1);
      }
      continue;
    }
    if (line.rfind("axis0", 0) == 0) continue;  // column header
    const auto comma = line.rfind(',');
    map.labels.push_back(static_cast<FeasibilityLabel>(std::stoi(line.substr(comma + 1))));
  }
  if (axis_seen != map.grid.dim || map.labels.size() != map.grid.total())
    throw ModelError("region map inconsistent: " + path);
  return map;
}

namespace {

// Labels one node by sliding a (n+1)-state window along the closed-loop
// trajectory: window t holds x_t..x_{t+n}, whose residuals decide whether the
// policy is initially feasible at x_t. One policy evaluation per real step.
FeasibilityLabel label_node(const SystemSpec& spec, const VirtualTimeConstraint& g,
                            const Policy& pi, const State& x0, std::size_t T_max) {
  const int n = g.n;
  State window[12];
  window[0] = x0;
  for (int k = 0; k < n; ++k)
    window[k + 1] = step(spec, window[k], clamp(spec, pi(spec, window[k])));

  const double escape_radius = 6.0;  // unicycle: obstacle interaction is long gone
  for (std::size_t t = 0; t <= T_max; ++t) {
    const double viol =
        g.max_violation(spec, std::span<const State>(window, static_cast<size_t>(n + 1)));
    if (viol > kFeasTol)
      return t == 0 ? FeasibilityLabel::Infeasible : FeasibilityLabel::InitiallyFeasible;
    if (spec.kind == SystemKind::Braking) {
      if (window[0][1] <= 0.0) return FeasibilityLabel::EndlesslyFeasible;  // frozen at rest
    } else {
      const double dist = std::sqrt(window[0][0] * window[0][0] + window[0][1] * window[0][1]);
      if (dist > escape_radius) {
        const double ddot = window[0][2] * std::cos(window[0][3] - std::atan2(window[0][1], window[0][0]));
        if (ddot > 0) return FeasibilityLabel::EndlesslyFeasible;  // receding, far outside
      }
    }
    if (t == T_max) break;
    const State& last = window[n];
    const State next = step(spec, last, clamp(spec, pi(spec, last)));
    for (int k = 0; k < n; ++k) window[k] = window[k + 1];
    window[n] = next;
  }
  return FeasibilityLabel::EndlesslyFeasible;  // endless up to T_max
}

}  // namespace

RegionMap label_policy_region_lifted(const SystemSpec& spec, const VirtualTimeConstraint& g,
                                     const Policy& pi, const StateGrid& grid, std::size_t T_max,
                                     const std::function<State(const State&)>& lift, int jobs) {
  if (T_max < 1) throw ModelError("label_policy_region: T_max must be >= 1");
  RegionMap map;
  map.grid = grid;
  map.labels.assign(grid.total(), FeasibilityLabel::Infeasible);
  map.metadata["system"] = spec.name;
  map.metadata["constraint"] = g.describe();
  map.metadata["policy"] = pi.name;
  map.metadata["T_max"] = std::to_string(T_max);
  map.metadata["feas_tol"] = fmt_g(kFeasTol);
  map.metadata["method"] = "policy-rollout";
  if (spec.kind == SystemKind::Unicycle)
    map.metadata["endless"] = "up to T_max (escape heuristic: dist>6 and receding)";
  parallel_for(jobs, grid.total(), [&](std::size_t i) {
    map.labels[i] = label_node(spec, g, pi, lift(grid.node(i)), T_max);
  });
  return map;
}

RegionMap label_policy_region(const SystemSpec& spec, const VirtualTimeConstraint& g,
                              const Policy& pi, const StateGrid& grid, std::size_t T_max,
                              int jobs) {
  return label_policy_region_lifted(spec, g, pi, grid, T_max,
                                    [](const State& x) { return x; }, jobs);
}

RegionMap label_state_region(const SystemSpec& spec, const VirtualTimeConstraint& g,
                             const StateGrid& grid, const SolverParams& params, int jobs) {
  RegionMap map;
  map.grid = grid;
  map.labels.assign(grid.total(), FeasibilityLabel::Infeasible);
  map.metadata["system"] = spec.name;
  map.metadata["constraint"] = g.describe();
  map.metadata["policy"] = "none";
  map.metadata["feas_tol"] = fmt_g(params.feas_tol);
  const bool pointwise = g.family == ConstraintFamily::Pointwise;
  if (pointwise) {
    if (spec.kind != SystemKind::Braking)
      throw ModelError("label_state_region: pointwise endless labels need the braking oracle");
    map.metadata["method"] = "ifr-solve + pointwise certified under-approximation (analytic max EFR)";
  } else {
    map.metadata["method"] = "ifr-solve + CIS/CA equivalence (EFR = IFR)";
  }
  RegionMap max_efr;
  if (pointwise) max_efr = max_efr_braking(grid);
  parallel_for(jobs, grid.total(), [&](std::size_t i) {
    const State x = grid.node(i);
    if (!is_initially_feasible_state(spec, g, x, params)) {
      map.labels[i] = FeasibilityLabel::Infeasible;
      return;
    }
    if (!pointwise) {
      map.labels[i] = FeasibilityLabel::EndlesslyFeasible;
      return;
    }
    map.labels[i] = is_endless(max_efr.labels[i]) ? FeasibilityLabel::EndlesslyFeasible
                                                  : FeasibilityLabel::InitiallyFeasible;
  });
  return map;
}

RegionMap max_efr_braking(const StateGrid& grid) {
  RegionMap map;
  map.grid = grid;
  map.labels.assign(grid.total(), FeasibilityLabel::Infeasible);
  map.metadata["system"] = "braking";
  map.metadata["method"] = "analytic max EFR: d >= v^2/20";
  for (std::size_t i = 0; i < grid.total(); ++i) {
    const State x = grid.node(i);
    if (x[0] >= x[1] * x[1] / 20.0) map.labels[i] = FeasibilityLabel::EndlesslyFeasible;
  }
  return map;
}

RegionMap max_efr_braking_discrete(const StateGrid& grid) {
  const SystemSpec spec = braking_spec();
  const Policy brake = best_effort_policy();
  RegionMap map;
  map.grid = grid;
  map.labels.assign(grid.total(), FeasibilityLabel::Infeasible);
  map.metadata["system"] = "braking";
  map.metadata["method"] = "discrete max EFR: max-braking rollout never violates";
  for (std::size_t i = 0; i < grid.total(); ++i) {
    State x = grid.node(i);
    bool safe = true;
    for (int t = 0; t < 200; ++t) {
      if (spec.h(x) > kFeasTol) {
        safe = false;
        break;
      }
      if (x[1] <= 0.0) break;  // at rest, frozen
      x = step(spec, x, brake(spec, x));
    }
    if (safe) map.labels[i] = FeasibilityLabel::EndlesslyFeasible;
  }
  return map;
}

ContainmentReport check_containment(const RegionMap& A, const RegionMap& B,
                                    FeasibilityLabel level) {
  if (A.grid.total() != B.grid.total() || A.grid.dim != B.grid.dim)
    throw ModelError("check_containment: grid mismatch");
  ContainmentReport rep;
  for (std::size_t i = 0; i < A.labels.size(); ++i) {
    const bool in_a = A.labels[i] >= level;
    const bool in_b = B.labels[i] >= level;
    if (in_a) ++rep.count_a;
    if (in_b) ++rep.count_b;
    if (in_a && !in_b) {
      ++rep.violation_count;
      if (rep.violations.size() < 100) rep.violations.push_back(i);
    }
  }
  rep.holds = rep.violation_count == 0;
  return rep;
}

ChainReport check_monotonicity(const std::vector<RegionMap>& maps) {
  ChainReport rep;
  rep.holds = true;
  for (std::size_t k = 0; k + 1 < maps.size(); ++k) {
    const auto efr = check_containment(maps[k], maps[k + 1], FeasibilityLabel::EndlesslyFeasible);
    if (!efr.holds) {
      rep.holds = false;
      rep.detail += "EFR chain broken between maps " + std::to_string(k) + " and " +
                    std::to_string(k + 1) + " (" + std::to_string(efr.violation_count) +
                    " cells); ";
    }
    const auto ifr = check_containment(maps[k + 1], maps[k], FeasibilityLabel::InitiallyFeasible);
    if (!ifr.holds) {
      rep.holds = false;
      rep.detail += "IFR chain broken between maps " + std::to_string(k + 1) + " and " +
                    std::to_string(k) + " (" + std::to_string(ifr.violation_count) + " cells); ";
    }
  }
  if (rep.holds) rep.detail = "chains hold";
  return rep;
}

EquivalenceReport check_equivalence_conditions(const RegionMap& map_state, const SystemSpec& spec,
                                               int action_lattice, int jobs) {
  EquivalenceReport rep;
  const StateGrid& grid = map_state.grid;
  std::vector<uint8_t> fail(grid.total(), 0);
  std::atomic<std::size_t> checked{0};
  parallel_for(jobs, grid.total(), [&](std::size_t i) {
    if (!is_initially(map_state.labels[i])) return;
    checked.fetch_add(1, std::memory_order_relaxed);
    const State x = grid.node(i);
    const int L = action_lattice;
    bool ok = false;
    const int combos = spec.action_dim == 1 ? L : L * L;
    for (int c = 0; c < combos && !ok; ++c) {
      Action u = Action::zeros(spec.action_dim);
      const int k0 = spec.action_dim == 1 ? c : c % L;
      u[0] = spec.action_lower[0] +
             (spec.action_upper[0] - spec.action_lower[0]) * k0 / static_cast<double>(L - 1);
      if (spec.action_dim == 2) {
        const int k1 = c / L;
        u[1] = spec.action_lower[1] +
               (spec.action_upper[1] - spec.action_lower[1]) * k1 / static_cast<double>(L - 1);
      }
      const State xn = step(spec, x, u);
      if (is_initially(map_state.labels[grid.nearest(xn)])) ok = true;
    }
    if (!ok) fail[i] = 1;
  });
  rep.checked = checked.load();
  for (std::size_t i = 0; i < fail.size(); ++i)
    if (fail[i]) {
      ++rep.failure_count;
      if (rep.failures.size() < 100) rep.failures.push_back(i);
    }
  return rep;
}

RegionStats region_stats(const RegionMap& map) {
  RegionStats st;
  st.total = map.labels.size();
  st.infeasible = map.count(FeasibilityLabel::Infeasible);
  st.initially = map.count(FeasibilityLabel::InitiallyFeasible);
  st.endless = map.count(FeasibilityLabel::EndlesslyFeasible);
  const double tot = static_cast<double>(st.total);
  st.frac_infeasible = static_cast<double>(st.infeasible) / tot;
  st.frac_initially = static_cast<double>(st.initially) / tot;
  st.frac_endless = static_cast<double>(st.endless) / tot;
  return st;
}

InvarianceReport check_forward_invariance(const RegionMap& efr_map, const SystemSpec& spec,
                                          const Policy& pi, std::size_t T, std::size_t max_samples,
                                          uint64_t seed, int jobs) {
  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < efr_map.labels.size(); ++i)
    if (is_endless(efr_map.labels[i])) cells.push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> picks;
  if (cells.size() <= max_samples) {
    picks = cells;
  } else {
    for (std::size_t k = 0; k < max_samples; ++k)
      picks.push_back(cells[rng.next_u64() % cells.size()]);
  }
  InvarianceReport rep;
  rep.rollouts = picks.size();
  std::vector<uint8_t> escaped(picks.size(), 0);
  parallel_for(jobs, picks.size(), [&](std::size_t k) {
    State x = efr_map.grid.node(picks[k]);
    for (std::size_t t = 0; t < T; ++t) {
      if (!efr_map.grid.inside_hull(x)) break;  // left the labeled region; nothing to check
      if (!is_endless(efr_map.labels[efr_map.grid.nearest(x)])) {
        escaped[k] = 1;
        break;
      }
      if (spec.kind == SystemKind::Braking && x[1] <= 0.0) break;
      x = step(spec, x, clamp(spec, pi(spec, x)));
    }
  });
  for (uint8_t e : escaped) rep.escapes += e;
  return rep;
}

}  // namespace feasreg
