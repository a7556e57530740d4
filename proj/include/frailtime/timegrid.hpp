#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace frailtime {

/**
 * Partition a_0 < a_1 < ... < a_L of the follow-up domain.
 *
 * Interval k (1-based) is I_k = [a_{k-1}, a_k); the last interval is closed
 * at a_L so an event at exactly the study end still belongs to it. Times past
 * a_L are the censoring convention: full exposure, no event, always at risk.
 */
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> boundaries) : a_(std::move(boundaries)) {
    if (a_.size() < 2) throw std::invalid_argument("time axis needs at least two boundaries");
    for (std::size_t i = 0; i < a_.size(); ++i) {
      if (!std::isfinite(a_[i])) throw std::invalid_argument("time axis boundaries must be finite");
      if (i > 0 && !(a_[i] > a_[i - 1]))
        throw std::invalid_argument("time axis must be strictly increasing");
    }
  }

  std::size_t intervals() const { return a_.size() - 1; }
  double start() const { return a_.front(); }
  double end() const { return a_.back(); }
  std::span<const double> boundaries() const { return a_; }

  // Lower/upper boundary of 0-based interval k.
  double lower(std::size_t k) const { return a_[k]; }
  double upper(std::size_t k) const { return a_[k + 1]; }
  double width(std::size_t k) const { return a_[k + 1] - a_[k]; }

  // 0-based index of the interval holding t, for a_0 <= t <= a_L.
  std::size_t interval_of(double t) const {
    check_time(t);
    if (t >= end()) return intervals() - 1;
    std::size_t k = 0;
    while (t >= a_[k + 1]) ++k;
    return k;
  }

  void check_time(double t) const {
    if (!(t >= start()))
      throw std::invalid_argument("time " + std::to_string(t) + " precedes the start of follow-up " +
                                  std::to_string(start()));
  }

 private:
  std::vector<double> a_;
};

// Time spent inside each interval before t.
inline std::vector<double> exposure(double t, const TimeGrid& grid) {
  grid.check_time(t);
  std::vector<double> e(grid.intervals(), 0.0);
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (t < grid.lower(k)) e[k] = 0.0;
    else if (t < grid.upper(k)) e[k] = t - grid.lower(k);
    else e[k] = grid.width(k);
  }
  return e;
}

inline std::vector<std::uint8_t> event_vector(double t, bool event, const TimeGrid& grid) {
  grid.check_time(t);
  std::vector<std::uint8_t> d(grid.intervals(), 0);
  if (event && t <= grid.end()) d[grid.interval_of(t)] = 1;
  return d;
}

// 1 for every interval strictly before the one holding t; all ones past a_L.
inline std::vector<std::uint8_t> at_risk(double t, const TimeGrid& grid) {
  grid.check_time(t);
  std::vector<std::uint8_t> y(grid.intervals(), 1);
  if (t > grid.end()) return y;
  for (std::size_t k = grid.interval_of(t); k < y.size(); ++k) y[k] = 0;
  return y;
}

inline std::vector<double> midpoints(const TimeGrid& grid) {
  std::vector<double> m(grid.intervals());
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = 0.5 * (grid.lower(k) + grid.upper(k));
  return m;
}

struct UnitTemporal {
  std::vector<double> e;
  std::vector<std::uint8_t> d;
  std::vector<std::uint8_t> y;
};

inline UnitTemporal unit_temporal(double t, bool event, const TimeGrid& grid) {
  return {exposure(t, grid), event_vector(t, event, grid), at_risk(t, grid)};
}

// n x L exposure / event / at-risk matrices for a whole sample.
struct TemporalMatrices {
  Eigen::MatrixXd e;
  Eigen::MatrixXd d;
  Eigen::MatrixXd y;
};

inline TemporalMatrices temporal_matrices(std::span<const double> time, std::span<const std::uint8_t> event,
                                          const TimeGrid& grid) {
  if (time.size() != event.size()) throw std::invalid_argument("time and event lengths differ");
  const auto n = static_cast<Eigen::Index>(time.size());
  const auto L = static_cast<Eigen::Index>(grid.intervals());
  TemporalMatrices m{Eigen::MatrixXd(n, L), Eigen::MatrixXd(n, L), Eigen::MatrixXd(n, L)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto u = unit_temporal(time[i], event[i] != 0, grid);
    for (Eigen::Index k = 0; k < L; ++k) {
      m.e(i, k) = u.e[k];
      m.d(i, k) = u.d[k];
      m.y(i, k) = u.y[k];
    }
  }
  return m;
}

}  // namespace frailtime
