#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "frailtime/dataio.hpp"
#include "frailtime/inference.hpp"
#include "frailtime/likelihood.hpp"
#include "frailtime/optimizer.hpp"
#include "frailtime/params.hpp"
#include "frailtime/timegrid.hpp"

namespace frailtime {

struct FitResult {
  // Provenance of the fit, kept so that new data can be encoded identically.
  FormulaSpec formula;
  Encoding encoding;
  std::optional<std::string> status_column;
  std::vector<double> time_axis;
  ParamBounds bounds;
  std::vector<std::string> group_names;
  std::vector<std::string> covariate_names;
  std::size_t n_units = 0;
  FitOptions options;

  ParamVector params;
  double loglik = 0.0;
  double aic = 0.0;
  bool converged = false;
  std::size_t n_run = 0;
  OptimTrace trace;

  std::vector<std::optional<double>> hessian;
  std::vector<std::optional<double>> se;
  ConfidenceIntervals ci;
  double z = 0.0;

  std::vector<double> baseline_hazard;
  FrailtyDispersion dispersion_full;
  FrailtyDispersion dispersion_partial;
  PosteriorFrailty posterior;

  const ParamLayout& layout() const { return params.layout(); }
  TimeGrid grid() const { return TimeGrid(time_axis); }
  const FrailtyDispersion& dispersion() const { return options.full_sd ? dispersion_full : dispersion_partial; }
};

// Everything derived from an optimum; split out so tests can feed a chosen p.
inline void fill_inference(FitResult& r, const ModelData& data) {
  const auto ll = [&](const ParamVector& q) { return loglik(q, data); };
  r.aic = aic(r.params.size(), r.loglik);
  r.hessian = hessian_diag(ll, r.params, r.options.h_dd);
  r.se = standard_errors(r.hessian);
  r.z = confidence_z(r.options.level, r.options.literal_z196);
  r.ci = confidence_intervals(r.params.values(), r.se, r.z);
  r.baseline_hazard = baseline_hazard(r.params);
  r.dispersion_full = frailty_dispersion(r.params, true);
  r.dispersion_partial = frailty_dispersion(r.params, false);
  r.posterior = posterior_frailty(r.params, data);
}

inline FitResult fit(const Dataset& ds, const TimeGrid& grid, const std::array<double, 5>& category_min,
                     const std::array<double, 5>& category_max, const FitOptions& opt, std::size_t threads = 1) {
  opt.validate();
  const ModelData data(ds, grid, threads);
  const auto bounds = expand_bounds(category_min, category_max, data.layout());
  const auto outcome = maximize_in_box(bounds, [&](const ParamVector& q) { return loglik(q, data); }, opt);

  FitResult r;
  r.encoding = ds.encoding;
  r.time_axis.assign(grid.boundaries().begin(), grid.boundaries().end());
  r.bounds = bounds;
  r.group_names = ds.group_names;
  r.covariate_names = ds.covariate_names;
  r.n_units = ds.units();
  r.options = opt;
  r.params = outcome.params;
  r.loglik = outcome.loglik;
  r.converged = outcome.trace.converged;
  r.n_run = outcome.trace.n_run;
  r.trace = outcome.trace;
  fill_inference(r, data);
  return r;
}

}  // namespace frailtime
