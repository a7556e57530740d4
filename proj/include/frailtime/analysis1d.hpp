#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "frailtime/likelihood.hpp"
#include "frailtime/optimizer.hpp"
#include "frailtime/params.hpp"

namespace frailtime {

struct Profile1DOptions {
  std::size_t index = 0;
  bool use_fixed = false;
  std::optional<ParamVector> fixed_params;
  std::size_t n_iter = 1;
  std::size_t n_points = 50;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  bool even_grid = false;  // evenly spaced curve abscissae instead of uniform draws
};

struct Profile1DIteration {
  double x_star = 0.0;
  double ll_star = 0.0;
  std::vector<double> x;
  std::vector<double> ll;
};

struct Profile1DResult {
  std::size_t index = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<Profile1DIteration> iterations;
};

/**
 * Log-likelihood along one coordinate.
 *
 * With use_fixed the other parameters sit at fixed_params in every iteration;
 * otherwise each iteration draws the whole vector uniformly in the box. The
 * target is then maximized by Brent over its own box and the curve is sampled
 * at n_points abscissae.
 */
inline Profile1DResult profile_1d(const ModelData& data, const ParamBounds& bounds, const Profile1DOptions& opt) {
  const auto& layout = data.layout();
  if (!(bounds.layout == layout)) throw std::invalid_argument("bounds layout does not match model data");
  if (opt.index >= layout.size())
    throw std::out_of_range("parameter index " + std::to_string(opt.index) + " out of range (n_p = " +
                            std::to_string(layout.size()) + ")");
  if (opt.n_iter == 0) throw std::invalid_argument("n_iter must be at least 1");
  if (opt.use_fixed) {
    if (!opt.fixed_params) throw std::invalid_argument("use_fixed requires fixed parameters");
    if (!(opt.fixed_params->layout() == layout)) throw std::invalid_argument("fixed parameters have the wrong layout");
    if (!opt.fixed_params->within(bounds)) throw std::invalid_argument("fixed parameters lie outside the bounds");
  }

  Profile1DResult out;
  out.index = opt.index;
  out.lo = bounds.lo[opt.index];
  out.hi = bounds.hi[opt.index];

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t it = 0; it < opt.n_iter; ++it) {
    const ParamVector base = opt.use_fixed ? *opt.fixed_params : random_init(bounds, rng);
    const auto along = [&](double v) { return loglik_along(opt.index, v, base, data); };

    Profile1DIteration iter;
    const auto best = brent_max(along, out.lo, out.hi, opt.tol);
    iter.x_star = best.x;
    iter.ll_star = best.f;
    for (std::size_t i = 0; i < opt.n_points; ++i) {
      double v;
      if (opt.even_grid)
        v = opt.n_points == 1       ? 0.5 * (out.lo + out.hi)
            : i + 1 == opt.n_points ? out.hi
                                    : out.lo + (out.hi - out.lo) * static_cast<double>(i) / static_cast<double>(opt.n_points - 1);
      else
        v = std::min(out.hi, out.lo + (out.hi - out.lo) * unit(rng));
      iter.x.push_back(v);
      iter.ll.push_back(along(v));
    }
    out.iterations.push_back(std::move(iter));
  }
  return out;
}

}  // namespace frailtime
