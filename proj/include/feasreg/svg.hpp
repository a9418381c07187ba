#pragma once

#include "feasreg/region.hpp"

namespace feasreg {

struct TrajectoryData {
  std::vector<std::array<double, 2>> points;  // plotted plane coordinates
  std::optional<std::size_t> violated_at;
};

/// Self-contained vector figure: region raster colored by label (red = endlessly
/// feasible, blue = initially feasible, gray = infeasible), the analytic max-EFR
/// boundary for braking (or the obstacle disk for the unicycle slice), and
/// trajectory polylines with violation markers.
void write_region_figure(const std::string& path, const RegionMap& region,
                         const std::vector<TrajectoryData>& trajectories,
                         const std::string& title);

}  // namespace feasreg
