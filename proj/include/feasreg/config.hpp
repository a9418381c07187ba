#pragma once

#include <map>
#include <optional>

#include "feasreg/region.hpp"
#include "feasreg/trainer.hpp"

namespace feasreg {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key=value scenario file with dotted section names. Unknown keys and
/// out-of-range values are rejected before any computation starts.
struct ScenarioConfig {
  std::map<std::string, std::string> kv;

  static ScenarioConfig from_file(const std::string& path);
  static ScenarioConfig from_string(const std::string& text);
  static std::string defaults_text();

  bool has(const std::string& key) const { return kv.count(key) > 0; }
  std::string get_str(const std::string& key, const std::string& def) const;
  double get_num(const std::string& key, double def) const;
  long get_int(const std::string& key, long def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<double> get_nums(const std::string& key, const std::vector<double>& def) const;

  // typed views
  SystemSpec system() const;
  StateGrid grid() const;            // sweep grid (braking plane or unicycle slice plane)
  StateGrid hull() const;            // full-state hull (training, sampling)
  VirtualTimeConstraint constraint(const SystemSpec& spec) const;
  SolverParams solver_params() const;
  TrainerConfig trainer_config() const;
  Policy controller(const SystemSpec& spec, const VirtualTimeConstraint& g) const;
  std::vector<State> starts(const SystemSpec& spec) const;
  // unicycle slice fixing (v0, theta0); braking states pass through
  State lift_slice(const SystemSpec& spec, double c0, double c1) const;

  uint64_t seed() const { return static_cast<uint64_t>(get_int("seed", 0)); }
  std::size_t t_max() const { return static_cast<std::size_t>(get_int("t_max", 500)); }
  int jobs() const { return static_cast<int>(get_int("jobs", 1)); }
  std::string out_dir() const { return get_str("out", "out"); }

  void override_seed(long s) { kv["seed"] = std::to_string(s); }
  void override_out(const std::string& o) { kv["out"] = o; }
  void override_jobs(int j) { kv["jobs"] = std::to_string(j); }
};

}  // namespace feasreg
