#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <vector>

#include "feasreg/dynamics.hpp"

namespace feasreg {

/// Rectangular state grid: per-axis bounds and node counts.
/// Nodes are lower + (upper-lower)*i/(count-1), so both ends are hit exactly.
struct StateGrid {
  int dim = 0;
  std::array<double, 4> lower{};
  std::array<double, 4> upper{};
  std::array<int, 4> count{};

  static StateGrid make(std::vector<double> lo, std::vector<double> hi, std::vector<double> res);

  std::size_t total() const {
    std::size_t n = 1;
    for (int d = 0; d < dim; ++d) n *= static_cast<std::size_t>(count[static_cast<size_t>(d)]);
    return n;
  }
  double node_coord(int axis, int i) const {
    const auto d = static_cast<size_t>(axis);
    return lower[d] + (upper[d] - lower[d]) * static_cast<double>(i) /
                          static_cast<double>(count[d] - 1);
  }
  double step_size(int axis) const {
    const auto d = static_cast<size_t>(axis);
    return (upper[d] - lower[d]) / static_cast<double>(count[d] - 1);
  }
  State node(std::size_t flat) const {
    State x = State::zeros(dim);
    std::size_t rem = flat;
    for (int d = dim - 1; d >= 0; --d) {
      const auto c = static_cast<std::size_t>(count[static_cast<size_t>(d)]);
      x[d] = node_coord(d, static_cast<int>(rem % c));
      rem /= c;
    }
    return x;
  }
  std::size_t flat_index(const std::array<int, 4>& idx) const {
    std::size_t f = 0;
    for (int d = 0; d < dim; ++d)
      f = f * static_cast<std::size_t>(count[static_cast<size_t>(d)]) +
          static_cast<std::size_t>(idx[static_cast<size_t>(d)]);
    return f;
  }
  // nearest-node lookup, clamped to the hull
  std::size_t nearest(const State& x) const;
  bool inside_hull(const State& x) const;
};

/// Scalar field over state space; the zero-sublevel set {F <= 0} is a feasible region.
struct FeasibilityField {
  virtual ~FeasibilityField() = default;
  virtual double value(const State& x) const = 0;
  // spatial gradient (exists a.e.; piecewise constant-slope for tabular fields)
  virtual Vec grad(const State& x) const;
  virtual std::string describe() const = 0;
};

using FieldPtr = std::shared_ptr<const FeasibilityField>;

/// Analytic braking HJ reachability function under the max-braking policy:
/// F(d, v) = -d - v^2 / (2 a_brk)
FieldPtr hjr_braking_analytic(double a_brk);

/// Braking control barrier function B(d, v) = -d + k v^2
FieldPtr cbf_braking(double k);

/// Unicycle control barrier function B = 0.7 - d - k * ddot,
/// ddot = v cos(theta - atan2(z, y)), d = distance to the obstacle center.
FieldPtr cbf_unicycle(double k);

/// Braking safety index phi = sigma + d_min^n - d^n + k v (signed power below d = 0).
FieldPtr si_phi_braking(double sigma, double d_min, double n_exp, double k);

/// Field defined by the real-time constraint itself (F = h).
FieldPtr h_field(const SystemSpec& spec);

/// Tabular field: grid nodes + multilinear interpolation.
/// Out-of-hull queries clamp to the hull and bump `hull_clamps`.
struct TabularField final : FeasibilityField {
  StateGrid grid;
  std::vector<double> values;  // row-major per StateGrid::flat_index
  mutable std::atomic<long> hull_clamps{0};

  TabularField(StateGrid g, std::vector<double> v) : grid(g), values(std::move(v)) {}
  double value(const State& x) const override;
  Vec grad(const State& x) const override;
  std::string describe() const override;

  void save_csv(const std::string& path) const;
  static std::shared_ptr<TabularField> load_csv(const std::string& path);
};

}  // namespace feasreg
