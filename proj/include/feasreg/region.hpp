#pragma once

#include <map>

#include "feasreg/ocp.hpp"

namespace feasreg {

enum class FeasibilityLabel : uint8_t { Infeasible = 0, InitiallyFeasible = 1, EndlesslyFeasible = 2 };

inline bool is_initially(FeasibilityLabel l) { return l >= FeasibilityLabel::InitiallyFeasible; }
inline bool is_endless(FeasibilityLabel l) { return l == FeasibilityLabel::EndlesslyFeasible; }

struct RegionMap {
  StateGrid grid;
  std::vector<FeasibilityLabel> labels;
  std::map<std::string, std::string> metadata;

  FeasibilityLabel at(std::size_t i) const { return labels[i]; }
  std::size_t count(FeasibilityLabel l) const;
  std::size_t count_initially() const;
  std::size_t count_endless() const;

  void save_csv(const std::string& path) const;
  static RegionMap load_csv(const std::string& path);
};

/// Labels every node by the feasibility of the given policy: InitiallyFeasible
/// when pi satisfies g from the node, EndlesslyFeasible when additionally every
/// state on the T_max-step real-time rollout under pi stays initially feasible.
RegionMap label_policy_region(const SystemSpec& spec, const VirtualTimeConstraint& g,
                              const Policy& pi, const StateGrid& grid, std::size_t T_max,
                              int jobs = 1);

/// Same labeling on a lower-dimensional slice: `lift` maps a grid node to the
/// full initial state (e.g. fixing v0 and theta0 on the unicycle plane).
RegionMap label_policy_region_lifted(const SystemSpec& spec, const VirtualTimeConstraint& g,
                                     const Policy& pi, const StateGrid& grid, std::size_t T_max,
                                     const std::function<State(const State&)>& lift,
                                     int jobs = 1);

/// Policy-free labels. InitiallyFeasible by the feasibility-only solve; the
/// endless label uses the family rule: CIS/CA families have EFR = IFR, the
/// pointwise family uses the certified under-approximation IFR intersected with
/// the analytic maximum EFR (braking only). The method is recorded in metadata.
RegionMap label_state_region(const SystemSpec& spec, const VirtualTimeConstraint& g,
                             const StateGrid& grid, const SolverParams& params = {}, int jobs = 1);

/// Analytic maximum EFR of the braking system: d >= v^2 / 20 (the paper's
/// continuous-time most-cautious-policy boundary, taken as the predicate).
RegionMap max_efr_braking(const StateGrid& grid);

/// Maximum EFR of the braking system under its own discrete-time dynamics:
/// a node is endlessly feasible iff the max-braking rollout never violates.
/// This is the reachability oracle consistent with the implemented step map.
RegionMap max_efr_braking_discrete(const StateGrid& grid);

struct ContainmentReport {
  bool holds = false;
  std::vector<std::size_t> violations;  // flat node indices, at most 100 kept
  std::size_t violation_count = 0;
  std::size_t count_a = 0, count_b = 0;
};

/// Verifies {x : A(x) >= level} is a subset of {x : B(x) >= level}.
ContainmentReport check_containment(const RegionMap& A, const RegionMap& B,
                                    FeasibilityLabel level);

struct ChainReport {
  bool holds = false;
  std::string detail;  // offending pair and example cells, when any
};

/// Maps ordered from weakest to strongest constraint: asserts the EFR cell-sets
/// form a nondecreasing chain and the IFR cell-sets a nonincreasing chain.
ChainReport check_monotonicity(const std::vector<RegionMap>& maps);

struct EquivalenceReport {
  std::size_t checked = 0;
  std::vector<std::size_t> failures;  // IFR cells with no lattice action back into the IFR
  std::size_t failure_count = 0;
  bool holds() const { return failure_count == 0; }
};

/// Necessary condition 2 for X_edls = X_init: every IFR cell has some lattice
/// action whose successor (nearest node) is again in the IFR.
EquivalenceReport check_equivalence_conditions(const RegionMap& map_state, const SystemSpec& spec,
                                               int action_lattice = 21, int jobs = 1);

struct RegionStats {
  std::size_t total = 0;
  std::size_t infeasible = 0, initially = 0, endless = 0;  // exclusive label counts
  double frac_infeasible = 0, frac_initially = 0, frac_endless = 0;
};

RegionStats region_stats(const RegionMap& map);

/// Forward-invariance check of EFR(pi): rollouts from sampled EFR cells must
/// visit only EFR-labeled cells (nearest-node lookup).
struct InvarianceReport {
  std::size_t rollouts = 0;
  std::size_t escapes = 0;  // rollouts that left the EFR labels
  bool holds() const { return escapes == 0; }
};

InvarianceReport check_forward_invariance(const RegionMap& efr_map, const SystemSpec& spec,
                                          const Policy& pi, std::size_t T, std::size_t max_samples,
                                          uint64_t seed, int jobs = 1);

}  // namespace feasreg
