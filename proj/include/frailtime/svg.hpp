#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "frailtime/analysis1d.hpp"
#include "frailtime/inference.hpp"
#include "frailtime/timegrid.hpp"

namespace frailtime::svg {

struct Series {
  enum class Kind { line, step, points };
  Kind kind = Kind::line;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  double radius = 3.0;
  std::string label;
};

struct Plot {
  std::string title;
  std::string xlabel = "Time";
  std::string ylabel = "Values";
  std::vector<Series> series;
  double width = 640;
  double height = 420;
};

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline const std::string& palette(std::size_t i) {
  static const std::vector<std::string> colors{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % colors.size()];
}

namespace detail {

// Round tick spacing: 1, 2 or 5 times a power of ten.
inline double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0) * mag;
}

inline std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace detail

// Standalone SVG document: axes, ticks, labels, then each series in order.
inline std::string render(const Plot& plot) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : plot.series) {
    for (double v : s.x)
      if (std::isfinite(v)) xmin = std::min(xmin, v), xmax = std::max(xmax, v);
    for (double v : s.y)
      if (std::isfinite(v)) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1;
  if (!std::isfinite(ymin)) ymin = 0, ymax = 1;
  if (xmax - xmin <= 0) xmin -= 0.5, xmax += 0.5;
  if (ymax - ymin <= 0) ymin -= 0.5 * (std::fabs(ymin) + 1), ymax += 0.5 * (std::fabs(ymax) + 1);
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  const double left = 70, right = 20, top = 40, bottom = 55;
  const double pw = plot.width - left - right, ph = plot.height - top - bottom;
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };
  using detail::num;

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << plot.width << "\" height=\"" << plot.height
    << "\" viewBox=\"0 0 " << plot.width << ' ' << plot.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!plot.title.empty())
    o << "<text x=\"" << plot.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(plot.title) << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  const double xs = detail::nice_step(xmax - xmin, 6);
  for (double t = std::ceil(xmin / xs) * xs; t <= xmax + 1e-9 * xs; t += xs) {
    o << "<line x1=\"" << num(sx(t)) << "\" y1=\"" << top + ph << "\" x2=\"" << num(sx(t)) << "\" y2=\""
      << top + ph + 5 << "\" stroke=\"black\"/>";
    o << "<text x=\"" << num(sx(t)) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
      << num(std::fabs(t) < 1e-12 * xs ? 0.0 : t) << "</text>\n";
  }
  const double ys = detail::nice_step(ymax - ymin, 6);
  for (double t = std::ceil(ymin / ys) * ys; t <= ymax + 1e-9 * ys; t += ys) {
    o << "<line x1=\"" << left - 5 << "\" y1=\"" << num(sy(t)) << "\" x2=\"" << left << "\" y2=\"" << num(sy(t))
      << "\" stroke=\"black\"/>";
    o << "<text x=\"" << left - 8 << "\" y=\"" << num(sy(t) + 4) << "\" text-anchor=\"end\">"
      << num(std::fabs(t) < 1e-12 * ys ? 0.0 : t) << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << plot.height - 12 << "\" text-anchor=\"middle\">"
    << escape(plot.xlabel) << "</text>\n";
  o << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << top + ph / 2
    << ")\">" << escape(plot.ylabel) << "</text>\n";

  for (const auto& s : plot.series) {
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (s.kind == Series::Kind::points) {
      for (std::size_t i = 0; i < n; ++i)
        o << "<circle cx=\"" << num(sx(s.x[i])) << "\" cy=\"" << num(sy(s.y[i])) << "\" r=\"" << s.radius
          << "\" fill=\"" << s.color << "\"/>\n";
      continue;
    }
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      if (s.kind == Series::Kind::step && i > 0) o << num(sx(s.x[i])) << ',' << num(sy(s.y[i - 1])) << ' ';
      o << num(sx(s.x[i])) << ',' << num(sy(s.y[i])) << ' ';
    }
    o << "\"/>\n";
  }
  o << "</svg>\n";
  return o.str();
}

// exp(phi_k) held constant over each interval.
inline std::string baseline_hazard_plot(const TimeGrid& grid, const std::vector<double>& hazard) {
  Series s;
  s.kind = Series::Kind::step;
  for (std::size_t k = 0; k < grid.intervals(); ++k) {
    s.x.push_back(grid.lower(k));
    s.y.push_back(hazard[k]);
  }
  s.x.push_back(grid.end());
  s.y.push_back(hazard.back());
  Plot p{"Baseline hazard step-function", "Time", "Baseline hazard", {s}};
  return render(p);
}

inline std::string frailty_sd_plot(const TimeGrid& grid, const std::vector<double>& sd, bool full) {
  Series s;
  s.kind = Series::Kind::points;
  s.x = midpoints(grid);
  s.y = sd;
  Series joined = s;
  joined.kind = Series::Kind::line;
  joined.color = "#aaaaaa";
  Plot p{full ? "Frailty standard deviation" : "Frailty standard deviation (time-varying part)", "Time", "Values",
         {joined, s}};
  return render(p);
}

// One polyline per group across interval midpoints. `values` is N x L.
inline std::string group_curves_plot(const TimeGrid& grid, const Eigen::MatrixXd& values, const std::string& title) {
  Plot p{title, "Time", "Values", {}};
  const auto mid = midpoints(grid);
  for (Eigen::Index j = 0; j < values.rows(); ++j) {
    Series line;
    line.x = mid;
    for (Eigen::Index k = 0; k < values.cols(); ++k) line.y.push_back(values(j, k));
    line.color = palette(static_cast<std::size_t>(j));
    Series dots = line;
    dots.kind = Series::Kind::points;
    dots.radius = 2.5;
    p.series.push_back(std::move(line));
    p.series.push_back(std::move(dots));
  }
  return render(p);
}

// alpha is constant in time, so each group is a flat segment across the domain.
inline std::string alpha_plot(const TimeGrid& grid, const Eigen::VectorXd& alpha) {
  Eigen::MatrixXd m(alpha.size(), static_cast<Eigen::Index>(grid.intervals()));
  for (Eigen::Index j = 0; j < alpha.size(); ++j) m.row(j).setConstant(alpha(j));
  return group_curves_plot(grid, m, "Posterior frailty estimates (alpha)");
}

// Survival values plotted at interval midpoints, one curve per unit coloured by group.
inline std::string survival_plot(const TimeGrid& grid, const SurvivalTable& t,
                                 const std::vector<std::string>& group_order) {
  Plot p{"Conditional survival", "Time", "Values", {}};
  const auto mid = midpoints(grid);
  for (Eigen::Index i = 0; i < t.S.rows(); ++i) {
    Series s;
    s.x = mid;
    for (Eigen::Index k = 0; k < t.S.cols(); ++k) s.y.push_back(t.S(i, k));
    const auto it = std::find(group_order.begin(), group_order.end(), t.group[static_cast<std::size_t>(i)]);
    s.color = palette(static_cast<std::size_t>(it - group_order.begin()));
    p.series.push_back(std::move(s));
  }
  return render(p);
}

// Curve samples in grey, maximizers in red.
inline std::string profile_plot(const Profile1DResult& r, const std::string& name) {
  Series samples, best;
  samples.kind = best.kind = Series::Kind::points;
  samples.color = "#555555";
  samples.radius = 2.0;
  best.color = "#d62728";
  best.radius = 5.0;
  for (const auto& it : r.iterations) {
    samples.x.insert(samples.x.end(), it.x.begin(), it.x.end());
    samples.y.insert(samples.y.end(), it.ll.begin(), it.ll.end());
    best.x.push_back(it.x_star);
    best.y.push_back(it.ll_star);
  }
  Plot p{"1D log-likelihood analysis", name, "Log-likelihood", {samples, best}};
  return render(p);
}

}  // namespace frailtime::svg
