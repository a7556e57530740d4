#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/normal.hpp>

namespace frailtime::numeric {

// log(sum(exp(v))) with the usual max shift. Empty input gives -inf.
inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

inline double log_binomial(unsigned n, unsigned k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// log Gamma(s + m) - log Gamma(s), i.e. the log rising factorial.
inline double log_rising(double s, double m) { return std::lgamma(s + m) - std::lgamma(s); }

// Two-sided standard normal quantile: z such that P(|Z| <= z) = level.
inline double two_sided_z(double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must lie in (0,1)");
  boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, 0.5 + 0.5 * level);
}

// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace frailtime::numeric
