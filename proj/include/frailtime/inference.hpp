#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "frailtime/dataio.hpp"
#include "frailtime/likelihood.hpp"
#include "frailtime/numeric.hpp"
#include "frailtime/params.hpp"
#include "frailtime/timegrid.hpp"

namespace frailtime {

// Literal z used by the posterior-frailty intervals.
inline constexpr double kZ196 = 1.96;

/**
 * Diagonal of the Hessian by centred second differences,
 * H_pp = (ll(p - h e_p) - 2 ll(p) + ll(p + h e_p)) / h^2.
 *
 * Probes are not projected back into the box. An entry whose probe throws or
 * returns a non-finite value is left empty.
 */
template <class Objective>
std::vector<std::optional<double>> hessian_diag(Objective&& ll, const ParamVector& p_hat, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  auto safe = [&](const ParamVector& q) -> double {
    try {
      return ll(q);
    } catch (const std::exception&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  const double centre = safe(p_hat);
  std::vector<std::optional<double>> out(p_hat.size());
  for (std::size_t i = 0; i < p_hat.size(); ++i) {
    ParamVector plus = p_hat, minus = p_hat;
    plus[i] += h;
    minus[i] -= h;
    const double hp = (safe(minus) - 2.0 * centre + safe(plus)) / (h * h);
    if (std::isfinite(hp)) out[i] = hp;
  }
  return out;
}

// se = 1 / sqrt(-H_pp); empty where the direction is flat or convex.
inline std::vector<std::optional<double>> standard_errors(std::span<const std::optional<double>> hdiag) {
  std::vector<std::optional<double>> se(hdiag.size());
  for (std::size_t i = 0; i < hdiag.size(); ++i)
    if (hdiag[i] && -*hdiag[i] > 0.0) se[i] = 1.0 / std::sqrt(-*hdiag[i]);
  return se;
}

inline double confidence_z(double level, bool literal_196 = false) {
  if (literal_196) {
    if (level != 0.95) throw std::invalid_argument("the literal 1.96 quantile only applies to level 0.95");
    return kZ196;
  }
  return numeric::two_sided_z(level);
}

struct ConfidenceIntervals {
  std::vector<std::optional<double>> lo;
  std::vector<std::optional<double>> hi;
};

inline ConfidenceIntervals confidence_intervals(std::span<const double> p_hat,
                                                std::span<const std::optional<double>> se, double z) {
  if (p_hat.size() != se.size()) throw std::invalid_argument("estimate and standard-error lengths differ");
  ConfidenceIntervals ci{std::vector<std::optional<double>>(se.size()), std::vector<std::optional<double>>(se.size())};
  for (std::size_t i = 0; i < se.size(); ++i) {
    if (!se[i]) continue;
    ci.lo[i] = p_hat[i] - z * *se[i];
    ci.hi[i] = p_hat[i] + z * *se[i];
  }
  return ci;
}

inline double aic(std::size_t n_params, double ll) { return 2.0 * static_cast<double>(n_params) - 2.0 * ll; }

struct FrailtyDispersion {
  std::vector<double> variance;
  std::vector<double> sd;
};

// full: mu1*nu + mu2*gamma_k; partial: mu2*gamma_k only.
inline FrailtyDispersion frailty_dispersion(const ParamVector& p, bool full) {
  const auto gamma = p.gamma();
  FrailtyDispersion out{std::vector<double>(gamma.size()), std::vector<double>(gamma.size())};
  const double constant = full ? p.mu1() * p.nu() : 0.0;
  for (std::size_t k = 0; k < gamma.size(); ++k) {
    out.variance[k] = constant + p.mu2() * gamma[k];
    out.sd[k] = std::sqrt(out.variance[k]);
  }
  return out;
}

inline std::vector<double> baseline_hazard(const ParamVector& p) {
  std::vector<double> h;
  for (double phi : p.phi()) h.push_back(std::exp(phi));
  return h;
}

struct PosteriorFrailty {
  // Unnormalized empirical-Bayes means.
  Eigen::VectorXd alpha_raw;  // N
  Eigen::MatrixXd eps_raw;    // N x L
  double alpha_max = 0.0;
  double eps_max = 0.0;

  // Normalized by the maxima.
  Eigen::VectorXd alpha;  // N
  Eigen::MatrixXd eps;    // N x L
  Eigen::MatrixXd Z;      // N x L
  Eigen::VectorXd var_alpha;
  Eigen::MatrixXd var_eps;
  Eigen::MatrixXd var_Z;
  Eigen::MatrixXd ci_lo;
  Eigen::MatrixXd ci_hi;

  // Event counts and at-risk cumulative hazards that fed the estimates.
  Eigen::MatrixXd events;  // N_jk
  Eigen::MatrixXd hazard;  // H_jk

  double mean_Z() const { return Z.mean(); }
};

/**
 * Empirical-Bayes frailty estimates per group and interval.
 *
 * alpha_j = (mu1/nu + N_j) / (1/nu + H_j) and
 * eps_jk = (mu2/gamma_k + N_jk) / (1/gamma_k + H_jk), where H uses
 * e_ijk * Y_ijk * exp(phi_k + beta'x_ij). Both are written with numerator and
 * denominator multiplied through by nu (gamma_k), so an empty history returns
 * the prior means mu1 and mu2 exactly. Normalized terms divide by the group /
 * group-interval maxima; Z = alpha/alpha_max + eps/eps_max.
 */
inline PosteriorFrailty posterior_frailty(const ParamVector& p, const ModelData& data) {
  check_model_domain(p);
  const auto& groups = data.groups();
  const auto N = static_cast<Eigen::Index>(groups.size());
  const auto L = static_cast<Eigen::Index>(p.layout().L);
  const auto R = static_cast<Eigen::Index>(p.layout().R);
  const auto phi = p.phi();
  const auto beta = p.beta();
  const auto gamma = p.gamma();
  const double mu1 = p.mu1(), mu2 = p.mu2(), nu = p.nu();

  PosteriorFrailty pf;
  pf.alpha_raw.resize(N);
  pf.eps_raw.resize(N, L);
  pf.var_alpha.resize(N);
  pf.var_eps.resize(N, L);
  pf.events = Eigen::MatrixXd::Zero(N, L);
  pf.hazard = Eigen::MatrixXd::Zero(N, L);
  Eigen::VectorXd raw_var_alpha(N);
  Eigen::MatrixXd raw_var_eps(N, L);

  for (Eigen::Index j = 0; j < N; ++j) {
    const auto& g = groups[j];
    for (Eigen::Index i = 0; i < g.x.rows(); ++i) {
      double lin = 0.0;
      for (Eigen::Index r = 0; r < R; ++r) lin += beta[r] * g.x(i, r);
      for (Eigen::Index k = 0; k < L; ++k) {
        pf.events(j, k) += g.d(i, k);
        pf.hazard(j, k) += g.e(i, k) * g.y(i, k) * std::exp(phi[k] + lin);
      }
    }
    double Nj = 0.0, Hj = 0.0;
    for (Eigen::Index k = 0; k < L; ++k) {
      const double denom = 1.0 + gamma[k] * pf.hazard(j, k);
      pf.eps_raw(j, k) = (mu2 + gamma[k] * pf.events(j, k)) / denom;
      raw_var_eps(j, k) = pf.eps_raw(j, k) * gamma[k] / denom;
      Nj += pf.events(j, k);
      Hj += pf.hazard(j, k);
    }
    const double denom = 1.0 + nu * Hj;
    pf.alpha_raw(j) = (mu1 + nu * Nj) / denom;
    raw_var_alpha(j) = pf.alpha_raw(j) * nu / denom;
  }

  pf.alpha_max = pf.alpha_raw.maxCoeff();
  pf.eps_max = pf.eps_raw.maxCoeff();
  pf.alpha = pf.alpha_raw / pf.alpha_max;
  pf.eps = pf.eps_raw / pf.eps_max;
  pf.var_alpha = raw_var_alpha / (pf.alpha_max * pf.alpha_max);
  pf.var_eps = raw_var_eps / (pf.eps_max * pf.eps_max);

  pf.Z.resize(N, L);
  pf.var_Z.resize(N, L);
  pf.ci_lo.resize(N, L);
  pf.ci_hi.resize(N, L);
  for (Eigen::Index j = 0; j < N; ++j) {
    for (Eigen::Index k = 0; k < L; ++k) {
      pf.Z(j, k) = pf.alpha(j) + pf.eps(j, k);
      pf.var_Z(j, k) = pf.var_alpha(j) + pf.var_eps(j, k);
      const double half = kZ196 * std::sqrt(pf.var_Z(j, k));
      pf.ci_lo(j, k) = pf.Z(j, k) - half;
      pf.ci_hi(j, k) = pf.Z(j, k) + half;
    }
  }
  return pf;
}

struct SurvivalTable {
  std::vector<std::string> group;  // cluster label per unit
  Eigen::MatrixXd S;               // n x L, value at the right end of each interval
};

/**
 * S_ij(a_m) = exp(-exp(beta'x_ij) * sum_{k<=m} Z_jk exp(phi_k) (a_k - a_{k-1})).
 * `Z` rows are indexed by ds.cluster_of.
 */
inline SurvivalTable conditional_survival(const ParamVector& p, const Eigen::MatrixXd& Z, const Dataset& ds,
                                          const TimeGrid& grid) {
  const auto L = static_cast<Eigen::Index>(grid.intervals());
  const auto R = static_cast<Eigen::Index>(p.layout().R);
  if (Z.cols() != L || static_cast<std::size_t>(p.layout().L) != grid.intervals())
    throw std::invalid_argument("frailty matrix / grid / layout disagree on the interval count");
  if (ds.design.cols() != R) throw std::invalid_argument("design width does not match the regressor count");
  const auto phi = p.phi();
  const auto beta = p.beta();

  SurvivalTable out;
  const auto n = static_cast<Eigen::Index>(ds.units());
  out.S.resize(n, L);
  out.group.reserve(ds.units());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto j = static_cast<Eigen::Index>(ds.cluster_of[i]);
    if (j >= Z.rows()) throw std::invalid_argument("unit refers to a cluster without frailty estimates");
    double lin = 0.0;
    for (Eigen::Index r = 0; r < R; ++r) lin += beta[r] * ds.design(i, r);
    const double scale = std::exp(lin);
    double cum = 0.0;
    for (Eigen::Index k = 0; k < L; ++k) {
      cum += Z(j, k) * std::exp(phi[k]) * grid.width(static_cast<std::size_t>(k));
      out.S(i, k) = std::exp(-scale * cum);
    }
    out.group.push_back(ds.group_names[ds.cluster_of[i]]);
  }
  return out;
}

}  // namespace frailtime
