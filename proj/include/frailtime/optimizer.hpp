#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "frailtime/error.hpp"
#include "frailtime/params.hpp"

namespace frailtime {

struct FitOptions {
  std::size_t n_extrarun = 60;
  double tol_ll = 1e-6;
  double tol_optimize = 1e-6;
  double h_dd = 1e-3;
  double level = 0.95;
  std::uint64_t seed = 0;
  bool verbose = false;
  bool full_sd = true;        // report full (alpha + eps) frailty dispersion
  bool literal_z196 = false;  // use 1.96 instead of the exact normal quantile

  void validate() const {
    if (!(tol_ll > 0.0) || !(tol_optimize > 0.0) || !(h_dd > 0.0))
      throw std::invalid_argument("tolerances and the FD step must be positive");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0,1)");
  }
};

struct OptimTrace {
  std::vector<double> run_lls;  // ll after each run
  std::size_t n_run = 0;
  bool converged = false;
};

struct BrentResult {
  double x;
  double f;
};

/**
 * Bounded 1D maximization: golden-section search with parabolic
 * interpolation (Brent). Port of the classic fmin routine, the same one
 * behind R's optimize(); endpoints are never evaluated, so a boundary
 * maximum is approached to within about tol.
 */
template <class F>
BrentResult brent_max(F&& f, double lo, double hi, double tol) {
  if (!(lo < hi)) throw std::invalid_argument("brent_max needs lo < hi");
  if (!(tol > 0.0)) throw std::invalid_argument("brent_max needs tol > 0");
  auto g = [&](double x) {
    const double v = f(x);
    if (!std::isfinite(v)) throw NumericalError("non-finite objective at x=" + std::to_string(x));
    return -v;
  };

  const double c = (3.0 - std::sqrt(5.0)) * 0.5;
  const double eps = std::sqrt(std::numeric_limits<double>::epsilon());
  double a = lo, b = hi;
  double v = a + c * (b - a);
  double w = v, x = v;
  double d = 0.0, e = 0.0;
  double fx = g(x);
  double fv = fx, fw = fx;
  const double tol3 = tol / 3.0;

  for (;;) {
    const double xm = (a + b) * 0.5;
    const double tol1 = eps * std::fabs(x) + tol3;
    const double t2 = tol1 * 2.0;
    if (std::fabs(x - xm) <= t2 - (b - a) * 0.5) break;

    double p = 0.0, q = 0.0, r = 0.0;
    if (std::fabs(e) > tol1) {
      r = (x - w) * (fx - fv);
      q = (x - v) * (fx - fw);
      p = (x - v) * q - (x - w) * r;
      q = (q - r) * 2.0;
      if (q > 0.0) p = -p;
      else q = -q;
      r = e;
      e = d;
    }

    double u;
    if (std::fabs(p) >= std::fabs(q * 0.5 * r) || p <= q * (a - x) || p >= q * (b - x)) {
      e = (x < xm) ? b - x : a - x;
      d = c * e;
    } else {
      d = p / q;
      u = x + d;
      if (u - a < t2 || b - u < t2) d = (x >= xm) ? -tol1 : tol1;
    }

    if (std::fabs(d) >= tol1) u = x + d;
    else if (d > 0.0) u = x + tol1;
    else u = x - tol1;

    const double fu = g(u);
    if (fu <= fx) {
      if (u < x) b = x;
      else a = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u;
      else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return {x, -fx};
}

/**
 * One pass of bounded coordinate maximization, visiting indices in `order`.
 *
 * Each coordinate is searched over its full box. The Brent candidate is kept
 * only if it does not lower the objective, so a pass never loses ground.
 */
template <class Objective>
ParamVector coordinate_run(ParamVector p, std::span<const std::size_t> order, const ParamBounds& bounds,
                           Objective&& ll, double tol) {
  double current = ll(p);
  for (std::size_t idx : order) {
    if (idx >= p.size()) throw std::out_of_range("direction index out of range");
    ParamVector probe = p;
    BrentResult best{};
    try {
      best = brent_max(
          [&](double value) {
            probe[idx] = value;
            return ll(probe);
          },
          bounds.lo[idx], bounds.hi[idx], tol);
    } catch (const std::exception& ex) {
      throw NumericalError("parameter index " + std::to_string(idx) + ": " + ex.what());
    }
    if (best.f >= current) {
      p[idx] = best.x;
      current = best.f;
    }
  }
  return p;
}

template <class Objective>
ParamVector coordinate_run(ParamVector p, const std::vector<std::size_t>& order, const ParamBounds& bounds,
                           Objective&& ll, double tol) {
  return coordinate_run(std::move(p), std::span<const std::size_t>(order), bounds, std::forward<Objective>(ll), tol);
}

struct OptimOutcome {
  ParamVector params;
  double loglik = -std::numeric_limits<double>::infinity();
  OptimTrace trace;
};

/**
 * Multi-run coordinate maximization under box constraints.
 *
 * Run 1 visits the coordinates in natural order, later runs in a seeded
 * random permutation. After every run the log-likelihood is compared with
 * the best of all previous runs; the loop stops once that change is within
 * tol_ll, or after n_p + n_extrarun runs (not converged).
 */
template <class Objective>
OptimOutcome maximize_in_box(const ParamBounds& bounds, Objective&& ll, const FitOptions& opt) {
  opt.validate();
  std::mt19937_64 rng(opt.seed);
  ParamVector p = random_init(bounds, rng);
  const std::size_t np = bounds.layout.size();
  const std::size_t total_runs = np + opt.n_extrarun;

  std::vector<std::size_t> order(np);
  std::iota(order.begin(), order.end(), std::size_t{0});

  OptimOutcome out{p, -std::numeric_limits<double>::infinity(), {}};
  double actual_tol = std::numeric_limits<double>::infinity();
  std::size_t run = 1;
  while (run <= total_runs && actual_tol > opt.tol_ll) {
    if (run > 1) std::shuffle(order.begin(), order.end(), rng);
    try {
      p = coordinate_run(std::move(p), order, bounds, ll, opt.tol_optimize);
    } catch (const std::exception& ex) {
      throw NumericalError("optimizer failed in run " + std::to_string(run) + ", " + ex.what());
    }
    const double current = ll(p);
    actual_tol = std::fabs(out.loglik - current);
    if (out.loglik < current) {
      out.loglik = current;
      out.params = p;
    }
    out.trace.run_lls.push_back(current);
    if (opt.verbose) {
      std::clog << "run " << run << "/" << total_runs << "  ll = " << std::setprecision(10) << current;
      const auto& h = out.trace.run_lls;
      const std::size_t shown = std::min<std::size_t>(3, h.size() - 1);
      if (shown > 0) {
        std::clog << "  previous:";
        for (std::size_t i = h.size() - 1 - shown; i < h.size() - 1; ++i) std::clog << ' ' << h[i];
      }
      std::clog << '\n';
    }
    ++run;
  }
  out.trace.n_run = run - 1;
  out.trace.converged = actual_tol <= opt.tol_ll;
  return out;
}

}  // namespace frailtime
