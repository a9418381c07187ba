#include "feasreg/svg.hpp"

#include <cmath>
#include <sstream>

#include "feasreg/io.hpp"

namespace feasreg {

namespace {

constexpr double kW = 640, kH = 640, kM = 60;  // canvas and margin

struct Mapper {
  double x0, x1, y0, y1;
  double px(double x) const { return kM + (x - x0) / (x1 - x0) * (kW - 2 * kM); }
  double py(double y) const { return kH - kM - (y - y0) / (y1 - y0) * (kH - 2 * kM); }
};

const char* label_color(FeasibilityLabel l) {
  switch (l) {
    case FeasibilityLabel::EndlesslyFeasible: return "#d94a4a";  // red
    case FeasibilityLabel::InitiallyFeasible: return "#4a6fd9";  // blue
    default: return "#c8c8c8";                                   // gray
  }
}

}  // namespace

void write_region_figure(const std::string& path, const RegionMap& region,
                         const std::vector<TrajectoryData>& trajectories,
                         const std::string& title) {
  const StateGrid& g = region.grid;
  if (g.dim != 2) throw ModelError("write_region_figure: 2-D region maps only");
  Mapper m{g.lower[0], g.upper[0], g.lower[1], g.upper[1]};
  std::ostringstream s;
  s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH << "'>\n";
  s << "<rect width='100%' height='100%' fill='white'/>\n";
  s << "<text x='" << kW / 2 << "' y='24' text-anchor='middle' font-size='15'>" << title
    << "</text>\n";

  const double cw = (kW - 2 * kM) / (g.count[0] - 1);
  const double ch = (kH - 2 * kM) / (g.count[1] - 1);
  for (std::size_t i = 0; i < region.labels.size(); ++i) {
    const State x = g.node(i);
    s << "<rect x='" << m.px(x[0]) - cw / 2 << "' y='" << m.py(x[1]) - ch / 2 << "' width='" << cw
      << "' height='" << ch << "' fill='" << label_color(region.labels[i]) << "'/>\n";
  }

  const bool braking = region.metadata.count("system") == 0 ||
                       region.metadata.at("system") == "braking";
  if (braking) {
    // analytic max-EFR boundary d = v^2/20 drawn in the (d, v) plane
    s << "<polyline fill='none' stroke='#7a0000' stroke-width='2' stroke-dasharray='6,4' points='";
    for (int k = 0; k <= 200; ++k) {
      const double v = g.lower[1] + (g.upper[1] - g.lower[1]) * k / 200.0;
      const double d = v * v / 20.0;
      if (d < g.lower[0] || d > g.upper[0]) continue;
      s << m.px(d) << "," << m.py(v) << " ";
    }
    s << "'/>\n";
  } else {
    const double r = 0.5;
    s << "<circle cx='" << m.px(0) << "' cy='" << m.py(0) << "' r='"
      << r / (g.upper[0] - g.lower[0]) * (kW - 2 * kM) << "' fill='#666666' fill-opacity='0.8'/>\n";
  }

  const char* traj_colors[6] = {"#144d14", "#8a2be2", "#cc6600", "#006666", "#663300", "#222222"};
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const auto& tr = trajectories[k];
    const char* col = traj_colors[k % 6];
    s << "<polyline fill='none' stroke='" << col << "' stroke-width='1.5' points='";
    for (const auto& p : tr.points) s << m.px(p[0]) << "," << m.py(p[1]) << " ";
    s << "'/>\n";
    if (!tr.points.empty()) {
      const auto& p0 = tr.points.front();
      s << "<circle cx='" << m.px(p0[0]) << "' cy='" << m.py(p0[1]) << "' r='4' fill='" << col
        << "'/>\n";
    }
    if (tr.violated_at && *tr.violated_at < tr.points.size()) {
      const auto& pv = tr.points[*tr.violated_at];
      const double X = m.px(pv[0]), Y = m.py(pv[1]);
      s << "<path d='M" << X - 5 << " " << Y - 5 << " L" << X + 5 << " " << Y + 5 << " M" << X - 5
        << " " << Y + 5 << " L" << X + 5 << " " << Y - 5
        << "' stroke='red' stroke-width='2.5'/>\n";
    }
  }

  // axes
  s << "<rect x='" << kM << "' y='" << kM << "' width='" << kW - 2 * kM << "' height='"
    << kH - 2 * kM << "' fill='none' stroke='black'/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double fx = g.lower[0] + (g.upper[0] - g.lower[0]) * k / 5.0;
    const double fy = g.lower[1] + (g.upper[1] - g.lower[1]) * k / 5.0;
    s << "<text x='" << m.px(fx) << "' y='" << kH - kM + 18
      << "' text-anchor='middle' font-size='11'>" << fx << "</text>\n";
    s << "<text x='" << kM - 8 << "' y='" << m.py(fy) + 4
      << "' text-anchor='end' font-size='11'>" << fy << "</text>\n";
  }
  s << "</svg>\n";
  write_file_atomic(path, s.str());
}

}  // namespace feasreg
