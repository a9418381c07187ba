#pragma once

#include <mutex>

#include "feasreg/config.hpp"

namespace feasreg {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;
  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

/// Builds and caches the braking benchmark region maps shared by the theorem
/// suites: pointwise n in {2,3,5,10}, CBF k in {0.5,0.2,0.1,0.05}, SI
/// (n=0.5, k=0.23), HJR analytic, each swept with the MPC and best-effort
/// policies plus the policy-free state labeling.
class MapRegistry {
 public:
  MapRegistry(StateGrid grid, SolverParams params, std::size_t T_max, int jobs);

  const SystemSpec& spec() const { return spec_; }
  const StateGrid& grid() const { return grid_; }
  int jobs() const { return jobs_; }
  std::size_t t_max() const { return T_max_; }
  const SolverParams& params() const { return params_; }

  static std::vector<VirtualTimeConstraint> braking_constraint_matrix();

  const RegionMap& policy_map(const VirtualTimeConstraint& g, const std::string& policy_kind);
  const RegionMap& state_map(const VirtualTimeConstraint& g);
  const RegionMap& max_efr();
  const RegionMap& max_efr_disc();
  const RegionMap& cstr_map();

  Policy make_policy(const VirtualTimeConstraint& g, const std::string& policy_kind) const;

 private:
  SystemSpec spec_;
  StateGrid grid_;
  SolverParams params_;
  std::size_t T_max_;
  int jobs_;
  std::map<std::string, RegionMap> cache_;
  std::mutex mu_;
};

// nodes within Chebyshev distance 1 of a label-level change (2-D grids)
std::vector<uint8_t> boundary_band(const RegionMap& map, FeasibilityLabel level);

SuiteReport suite_containment(MapRegistry& reg);
SuiteReport suite_monotonicity(MapRegistry& reg);
SuiteReport suite_equivalence(MapRegistry& reg);
SuiteReport suite_cis_invariance(MapRegistry& reg);
SuiteReport suite_ca_equivalence(MapRegistry& reg, std::size_t samples, uint64_t seed);

std::vector<SuiteReport> run_suites(MapRegistry& reg, const std::string& which, uint64_t seed);

}  // namespace feasreg
