#pragma once

#include "feasreg/config.hpp"

namespace feasreg {

int cmd_simulate(const ScenarioConfig& cfg);
int cmd_region(const ScenarioConfig& cfg);
int cmd_train(const ScenarioConfig& cfg);
int cmd_verify(const ScenarioConfig& cfg);
int cmd_plot(const ScenarioConfig& cfg);

// writes one trajectory CSV: step, state, action, h, g residuals, violated flag
void write_trajectory_csv(const std::string& path, const SystemSpec& spec,
                          const VirtualTimeConstraint& g, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::string& path, int state_dim);

}  // namespace feasreg
