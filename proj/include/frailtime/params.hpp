#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace frailtime {

// Parameter categories in storage order: p = [phi, beta, mu1, nu, gamma].
enum class Category : std::size_t { phi = 0, beta = 1, mu1 = 2, nu = 3, gamma = 4 };

inline constexpr std::array<Category, 5> kCategories{Category::phi, Category::beta, Category::mu1, Category::nu,
                                                     Category::gamma};

inline constexpr std::string_view category_name(Category c) {
  constexpr std::array<std::string_view, 5> names{"phi", "beta", "mu1", "nu", "gamma"};
  return names[static_cast<std::size_t>(c)];
}

inline Category parse_category(std::string_view name) {
  for (auto c : kCategories)
    if (category_name(c) == name) return c;
  throw std::invalid_argument("unknown parameter category '" + std::string(name) + "'");
}

// Open-boundary offset used for strictly positive / unit-interval categories.
inline constexpr double kEps = 1e-10;

struct ParamLayout {
  std::size_t L = 0;  // intervals
  std::size_t R = 0;  // regressors

  static ParamLayout make(std::size_t intervals, std::size_t regressors) {
    if (intervals < 1 || regressors < 1) throw std::invalid_argument("layout needs L >= 1 and R >= 1");
    return {intervals, regressors};
  }

  std::size_t size() const { return 2 * L + R + 2; }

  std::array<std::size_t, 5> category_sizes() const { return {L, R, 1, 1, L}; }

  std::array<std::size_t, 5> offsets() const { return {0, L, L + R, L + R + 1, L + R + 2}; }

  std::size_t offset(Category c) const { return offsets()[static_cast<std::size_t>(c)]; }
  std::size_t count(Category c) const { return category_sizes()[static_cast<std::size_t>(c)]; }

  Category category_of(std::size_t index) const {
    if (index >= size()) throw std::out_of_range("parameter index " + std::to_string(index) + " out of range");
    Category found = Category::phi;
    for (auto c : kCategories)
      if (index >= offset(c)) found = c;
    return found;
  }

  bool operator==(const ParamLayout&) const = default;
};

struct ParamBounds {
  ParamLayout layout;
  std::array<double, 5> category_min{};
  std::array<double, 5> category_max{};
  std::vector<double> lo;
  std::vector<double> hi;
};

inline ParamBounds expand_bounds(const std::array<double, 5>& category_min, const std::array<double, 5>& category_max,
                                 const ParamLayout& layout) {
  for (std::size_t c = 0; c < 5; ++c) {
    const auto name = std::string(category_name(kCategories[c]));
    if (!std::isfinite(category_min[c]) || !std::isfinite(category_max[c]))
      throw std::invalid_argument("non-finite bound for category " + name);
    if (!(category_min[c] < category_max[c]))
      throw std::invalid_argument("inverted range for category " + name);
  }
  if (!(category_min[2] > 0.0 && category_max[2] < 1.0))
    throw std::invalid_argument("mu1 range must lie inside (0,1)");
  if (!(category_min[3] > 0.0)) throw std::invalid_argument("nu range must be positive");
  if (!(category_min[4] > 0.0)) throw std::invalid_argument("gamma range must be positive");

  ParamBounds b{layout, category_min, category_max, {}, {}};
  b.lo.reserve(layout.size());
  b.hi.reserve(layout.size());
  const auto sizes = layout.category_sizes();
  for (std::size_t c = 0; c < 5; ++c) {
    b.lo.insert(b.lo.end(), sizes[c], category_min[c]);
    b.hi.insert(b.hi.end(), sizes[c], category_max[c]);
  }
  return b;
}

/**
 * Flat parameter vector with typed category views.
 *
 * Values are not clamped to any box: finite-difference probes legitimately
 * step outside. Use within() to test box membership.
 */
class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(ParamLayout layout, std::vector<double> values) : layout_(layout), values_(std::move(values)) {
    if (values_.size() != layout_.size())
      throw std::invalid_argument("parameter vector has " + std::to_string(values_.size()) + " entries, layout needs " +
                                  std::to_string(layout_.size()));
  }
  explicit ParamVector(ParamLayout layout) : layout_(layout), values_(layout.size(), 0.0) {}

  const ParamLayout& layout() const { return layout_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> slice(Category c) const {
    return std::span<const double>(values_).subspan(layout_.offset(c), layout_.count(c));
  }
  std::span<double> slice(Category c) { return std::span<double>(values_).subspan(layout_.offset(c), layout_.count(c)); }

  std::span<const double> phi() const { return slice(Category::phi); }
  std::span<const double> beta() const { return slice(Category::beta); }
  std::span<const double> gamma() const { return slice(Category::gamma); }
  double mu1() const { return values_[layout_.offset(Category::mu1)]; }
  double mu2() const { return 1.0 - mu1(); }  // never stored
  double nu() const { return values_[layout_.offset(Category::nu)]; }

  bool within(const ParamBounds& b) const {
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (!(values_[i] >= b.lo[i] && values_[i] <= b.hi[i])) return false;
    return true;
  }

  bool operator==(const ParamVector&) const = default;

 private:
  ParamLayout layout_;
  std::vector<double> values_;
};

inline std::span<const double> extract(const ParamVector& p, Category c) { return p.slice(c); }

inline std::span<const double> extract(const ParamVector& p, std::string_view category) {
  return p.slice(parse_category(category));
}

// Uniform draw inside the box; lo + (hi - lo) * u keeps slivers inside [lo, hi].
template <class Engine>
ParamVector random_init(const ParamBounds& bounds, Engine& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> v(bounds.lo.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double u = unit(rng);
    v[i] = std::min(bounds.hi[i], bounds.lo[i] + (bounds.hi[i] - bounds.lo[i]) * u);
  }
  return ParamVector(bounds.layout, std::move(v));
}

inline ParamVector random_init(const ParamBounds& bounds, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_init(bounds, rng);
}

}  // namespace frailtime
