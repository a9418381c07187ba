#include "feasreg/field.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "feasreg/io.hpp"

namespace feasreg {

StateGrid StateGrid::make(std::vector<double> lo, std::vector<double> hi,
                          std::vector<double> res) {
  if (lo.size() != hi.size() || lo.size() != res.size() || lo.empty() || lo.size() > 4)
    throw ModelError("StateGrid: axis spec mismatch");
  StateGrid g;
  g.dim = static_cast<int>(lo.size());
  for (int d = 0; d < g.dim; ++d) {
    const auto s = static_cast<size_t>(d);
    if (res[s] <= 0 || hi[s] <= lo[s]) throw ModelError("StateGrid: bad axis");
    g.lower[s] = lo[s];
    g.upper[s] = hi[s];
    g.count[s] = static_cast<int>(std::lround((hi[s] - lo[s]) / res[s])) + 1;
    if (g.count[s] < 2) throw ModelError("StateGrid: need >= 2 nodes per axis");
  }
  return g;
}

std::size_t StateGrid::nearest(const State& x) const {
  std::array<int, 4> idx{};
  for (int d = 0; d < dim; ++d) {
    const auto s = static_cast<size_t>(d);
    double t = (x[d] - lower[s]) / (upper[s] - lower[s]) * static_cast<double>(count[s] - 1);
    int i = static_cast<int>(std::lround(t));
    idx[s] = std::min(count[s] - 1, std::max(0, i));
  }
  return flat_index(idx);
}

bool StateGrid::inside_hull(const State& x) const {
  for (int d = 0; d < dim; ++d) {
    const auto s = static_cast<size_t>(d);
    if (x[d] < lower[s] - 1e-12 || x[d] > upper[s] + 1e-12) return false;
  }
  return true;
}

Vec FeasibilityField::grad(const State& x) const {
  // central differences fallback for fields without an analytic gradient
  Vec g = Vec::zeros(x.size());
  const double hstep = 1e-6;
  for (int d = 0; d < x.size(); ++d) {
    State xp = x, xm = x;
    xp[d] += hstep;
    xm[d] -= hstep;
    g[d] = (value(xp) - value(xm)) / (2 * hstep);
  }
  return g;
}

namespace {

struct HjrBrakingField final : FeasibilityField {
  double a_brk;
  explicit HjrBrakingField(double a) : a_brk(a) {}
  double value(const State& x) const override { return -x[0] - x[1] * x[1] / (2.0 * a_brk); }
  Vec grad(const State& x) const override { return Vec{-1.0, -x[1] / a_brk}; }
  std::string describe() const override { return "hjr_braking_analytic(a_brk=" + fmt_g(a_brk) + ")"; }
};

struct CbfBrakingField final : FeasibilityField {
  double k;
  explicit CbfBrakingField(double kk) : k(kk) {}
  double value(const State& x) const override { return -x[0] + k * x[1] * x[1]; }
  Vec grad(const State& x) const override { return Vec{-1.0, 2.0 * k * x[1]}; }
  std::string describe() const override { return "cbf_braking(k=" + fmt_g(k) + ")"; }
};

struct CbfUnicycleField final : FeasibilityField {
  double k;
  explicit CbfUnicycleField(double kk) : k(kk) {}
  double value(const State& x) const override {
    const double d = std::sqrt(x[0] * x[0] + x[1] * x[1]);
    const double bearing = std::atan2(x[1], x[0]);
    const double ddot = x[2] * std::cos(x[3] - bearing);
    return 0.7 - d - k * ddot;
  }
  std::string describe() const override { return "cbf_unicycle(k=" + fmt_g(k) + ")"; }
};

struct SiPhiBrakingField final : FeasibilityField {
  double sigma, d_min, n_exp, k;
  SiPhiBrakingField(double s, double dm, double n, double kk)
      : sigma(s), d_min(dm), n_exp(n), k(kk) {}
  double value(const State& x) const override {
    return sigma + std::pow(d_min, n_exp) - spow(x[0], n_exp) + k * x[1];
  }
  Vec grad(const State& x) const override {
    // d/dx spow(x, n) = n |x|^(n-1)
    return Vec{-n_exp * std::pow(std::abs(x[0]), n_exp - 1.0), k};
  }
  std::string describe() const override {
    return "si_phi(sigma=" + fmt_g(sigma) + ",d_min=" + fmt_g(d_min) + ",n=" + fmt_g(n_exp) +
           ",k=" + fmt_g(k) + ")";
  }
};

struct HField final : FeasibilityField {
  SystemSpec spec;
  explicit HField(SystemSpec s) : spec(std::move(s)) {}
  double value(const State& x) const override { return spec.h(x); }
  Vec grad(const State& x) const override {
    if (spec.kind == SystemKind::Braking) return Vec{-1.0, 0.0};
    const double d = std::sqrt(x[0] * x[0] + x[1] * x[1]);
    Vec g = Vec::zeros(4);
    if (d > 1e-12) {
      g[0] = -x[0] / d;
      g[1] = -x[1] / d;
    }
    return g;
  }
  std::string describe() const override { return "h(" + spec.name + ")"; }
};

}  // namespace

FieldPtr hjr_braking_analytic(double a_brk) {
  if (a_brk >= 0) throw ModelError("hjr_braking_analytic: a_brk must be negative");
  return std::make_shared<HjrBrakingField>(a_brk);
}
FieldPtr cbf_braking(double k) { return std::make_shared<CbfBrakingField>(k); }
FieldPtr cbf_unicycle(double k) { return std::make_shared<CbfUnicycleField>(k); }
FieldPtr si_phi_braking(double sigma, double d_min, double n_exp, double k) {
  return std::make_shared<SiPhiBrakingField>(sigma, d_min, n_exp, k);
}
FieldPtr h_field(const SystemSpec& spec) { return std::make_shared<HField>(spec); }

double TabularField::value(const State& x) const {
  // multilinear interpolation with hull clamping
  std::array<int, 4> base{};
  std::array<double, 4> frac{};
  bool clamped = false;
  for (int d = 0; d < grid.dim; ++d) {
    const auto s = static_cast<size_t>(d);
    double t = (x[d] - grid.lower[s]) / (grid.upper[s] - grid.lower[s]) *
               static_cast<double>(grid.count[s] - 1);
    if (t < 0) {
      t = 0;
      clamped = true;
    }
    if (t > static_cast<double>(grid.count[s] - 1)) {
      t = static_cast<double>(grid.count[s] - 1);
      clamped = true;
    }
    int i = static_cast<int>(t);
    if (i >= grid.count[s] - 1) i = grid.count[s] - 2;
    base[s] = i;
    frac[s] = t - static_cast<double>(i);
  }
  if (clamped) hull_clamps.fetch_add(1, std::memory_order_relaxed);
  const int corners = 1 << grid.dim;
  double acc = 0;
  for (int c = 0; c < corners; ++c) {
    double w = 1;
    std::array<int, 4> idx{};
    for (int d = 0; d < grid.dim; ++d) {
      const auto s = static_cast<size_t>(d);
      const int bit = (c >> d) & 1;
      idx[s] = base[s] + bit;
      w *= bit ? frac[s] : (1.0 - frac[s]);
    }
    if (w != 0.0) acc += w * values[grid.flat_index(idx)];
  }
  return acc;
}

Vec TabularField::grad(const State& x) const {
  Vec g = Vec::zeros(grid.dim);
  for (int d = 0; d < grid.dim; ++d) {
    const double hstep = grid.step_size(d) * 0.5;
    State xp = x, xm = x;
    xp[d] += hstep;
    xm[d] -= hstep;
    g[d] = (value(xp) - value(xm)) / (2 * hstep);
  }
  return g;
}

std::string TabularField::describe() const {
  return "tabular(" + std::to_string(grid.dim) + "d," + std::to_string(grid.total()) + " nodes)";
}

void TabularField::save_csv(const std::string& path) const {
  std::ostringstream out;
  out << "# feasreg tabular field v1\n";
  out << "# dim=" << grid.dim << "\n";
  for (int d = 0; d < grid.dim; ++d) {
    const auto s = static_cast<size_t>(d);
    out << "# axis" << d << "=" << fmt_g(grid.lower[s]) << "," << fmt_g(grid.upper[s]) << ","
        << grid.count[s] << "\n";
  }
  for (std::size_t i = 0; i < values.size(); ++i) out << fmt_g(values[i]) << "\n";
  write_file_atomic(path, out.str());
}

std::shared_ptr<TabularField> TabularField::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open field file: " + path);
  std::string line;
  StateGrid g;
  std::vector<double> vals;
  int axis_seen = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eq = line.find('=');
      if (line.find("# dim=") == 0) {
        g.dim = std::stoi(line.substr(eq + 1));
      } else if (line.find("# axis") == 0 && eq != std::string::npos) {
        std::string rest = line.substr(eq + 1);
        double lo, hi;
        int cnt;
        if (std::sscanf(rest.c_str(), "%lf,%lf,%d", &lo, &hi, &cnt) != 3)
          throw ModelError("bad axis line in " + path);
        const auto s = static_cast<size_t>(axis_seen++);
        g.lower[s] = lo;
        g.upper[s] = hi;
        g.count[s] = cnt;
      }
      continue;
    }
    vals.push_back(std::stod(line));
  }
  if (axis_seen != g.dim || vals.size() != g.total())
    throw ModelError("field file inconsistent: " + path);
  return std::make_shared<TabularField>(g, std::move(vals));
}

}  // namespace feasreg
