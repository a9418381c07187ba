#pragma once

#include "feasreg/constraints.hpp"
#include "feasreg/mlp.hpp"

namespace feasreg {

struct TrainerConfig {
  double lr = 1e-4;
  int batch = 256;
  long iterations = 10000;
  std::vector<long> checkpoint_iters = {10, 100, 1000, 10000};
  uint64_t seed = 0;
  double gamma = 0.99;
  int hidden = 64;
  int target_sync = 100;       // field target-network sync period (learned-HJ mode)
  double field_gamma = 0.99;   // discounted-HJ backup
  bool learned_field = false;  // train a field net instead of using the constraint's field
};

struct Batch {
  std::vector<State> x;
};

/// Uniform state samples over the grid hull, drawn from the given generator.
Batch sample_batch(const StateGrid& hull, int n, Rng& rng);

/// Deterministic policy induced by a policy net (tanh-squashed into the action box).
Policy mlp_policy(const SystemSpec& spec, const Mlp& net, const std::string& name = "rl");

// --- losses; each returns the scalar loss and (optionally) parameter gradients ---

/// mean over batch of (V(x) - (r(x, pi(x)) + gamma V(x')))^2, target frozen
double value_loss(const SystemSpec& spec, const Mlp& value, const Mlp& policy, const Batch& batch,
                  double gamma, MlpGrads* grads);

/// feasible policy improvement:
/// L = -mean[1_{F(x)<=0} (r + gamma V(x'))] + mean[1_{F(x)>0} F_out(x')]
/// The region indicator is evaluated on the frozen field. F_out is the field
/// whose value at the successor is minimized outside the region.
double policy_loss(const SystemSpec& spec, const Mlp& policy, const Mlp& value,
                   const FeasibilityField& indicator_field, const FeasibilityField& out_field,
                   const Batch& batch, double gamma, MlpGrads* grads);

/// TD regression of a field net onto the discounted HJ backup of its frozen copy:
/// target = (1-gamma) h(x) + gamma max{h(x), F_tgt(x')}
double field_loss(const SystemSpec& spec, const Mlp& field, const Mlp& field_target,
                  const Mlp& policy, const Batch& batch, double gamma, MlpGrads* grads);

struct TrainingDiverged : std::runtime_error {
  long iteration;
  TrainingDiverged(long it, const std::string& what)
      : std::runtime_error("training diverged at iteration " + std::to_string(it) + ": " + what),
        iteration(it) {}
};

struct TrainResult {
  std::vector<Checkpoint> checkpoints;
  std::vector<double> value_losses;   // subsampled diagnostics
  std::vector<double> policy_losses;
};

/// Approximate dynamic programming with feasible policy improvement.
/// The virtual-time constraint supplies the feasibility function; with
/// cfg.learned_field a field net is trained by discounted-HJ TD regression
/// (feasible policy iteration) and used for the region indicator instead.
TrainResult train(const TrainerConfig& cfg, const SystemSpec& spec,
                  const VirtualTimeConstraint& g, const StateGrid& hull);

/// Field net wrapped as a FeasibilityField.
FieldPtr mlp_field(const Mlp& net);

}  // namespace feasreg
