#pragma once

#include <cmath>
#include <cstddef>
#include <future>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "frailtime/dataio.hpp"
#include "frailtime/error.hpp"
#include "frailtime/numeric.hpp"
#include "frailtime/params.hpp"
#include "frailtime/timegrid.hpp"

namespace frailtime {

// Units of one cluster, in ascending unit order.
struct GroupData {
  std::vector<std::size_t> units;
  Eigen::MatrixXd x;  // n_j x R
  Eigen::MatrixXd e;  // n_j x L exposures
  Eigen::MatrixXd d;  // n_j x L event indicators
  Eigen::MatrixXd y;  // n_j x L at-risk indicators
};

/**
 * Dataset + time grid, split by cluster once so that the likelihood, the
 * posterior and the survival predictions can all reuse the temporal matrices.
 */
class ModelData {
 public:
  ModelData(const Dataset& ds, const TimeGrid& grid, std::size_t threads = 1)
      : grid_(grid), layout_(ParamLayout::make(grid.intervals(), ds.regressors())), threads_(threads ? threads : 1) {
    if (ds.units() == 0) throw std::invalid_argument("dataset has no units");
    if (static_cast<std::size_t>(ds.design.rows()) != ds.units() || ds.event.size() != ds.units() ||
        ds.cluster_of.size() != ds.units())
      throw std::invalid_argument("dataset columns have inconsistent lengths");
    const auto tm = temporal_matrices(ds.time, ds.event, grid);
    std::vector<std::vector<std::size_t>> members(ds.groups());
    for (std::size_t i = 0; i < ds.units(); ++i) {
      if (ds.cluster_of[i] >= ds.groups()) throw std::invalid_argument("cluster index out of range");
      members[ds.cluster_of[i]].push_back(i);
    }
    groups_.reserve(members.size());
    for (auto& m : members) {
      if (m.empty()) throw std::invalid_argument("empty cluster");
      const auto nj = static_cast<Eigen::Index>(m.size());
      GroupData g;
      g.x.resize(nj, ds.design.cols());
      g.e.resize(nj, tm.e.cols());
      g.d.resize(nj, tm.d.cols());
      g.y.resize(nj, tm.y.cols());
      for (Eigen::Index r = 0; r < nj; ++r) {
        const auto i = static_cast<Eigen::Index>(m[r]);
        g.x.row(r) = ds.design.row(i);
        g.e.row(r) = tm.e.row(i);
        g.d.row(r) = tm.d.row(i);
        g.y.row(r) = tm.y.row(i);
      }
      g.units = std::move(m);
      groups_.push_back(std::move(g));
    }
  }

  const TimeGrid& grid() const { return grid_; }
  const ParamLayout& layout() const { return layout_; }
  const std::vector<GroupData>& groups() const { return groups_; }
  std::size_t threads() const { return threads_; }

 private:
  TimeGrid grid_;
  ParamLayout layout_;
  std::vector<GroupData> groups_;
  std::size_t threads_;
};

struct GroupSummaries {
  std::vector<double> A_k;           // sum_i A_ijk
  double A = 0.0;                    // sum_{i,k} A_ijk
  std::vector<unsigned> d_k;         // sum_i d_ijk
  double linpred_event_sum = 0.0;    // sum_{i,k} d_ijk (beta'x_ij + phi_k)
};

// A_ijk = e_ijk * exp(beta'x_ij + phi_k), reduced unit-ascending then interval-ascending.
inline GroupSummaries group_summaries(const ParamVector& p, const GroupData& g) {
  const auto L = static_cast<Eigen::Index>(p.layout().L);
  const auto R = static_cast<Eigen::Index>(p.layout().R);
  if (g.x.cols() != R || g.e.cols() != L || g.d.cols() != L)
    throw std::invalid_argument("group data dimensions do not match the parameter layout");
  const auto phi = p.phi();
  const auto beta = p.beta();

  GroupSummaries s;
  s.A_k.assign(static_cast<std::size_t>(L), 0.0);
  s.d_k.assign(static_cast<std::size_t>(L), 0);
  for (Eigen::Index i = 0; i < g.x.rows(); ++i) {
    double lin = 0.0;
    for (Eigen::Index r = 0; r < R; ++r) lin += beta[r] * g.x(i, r);
    for (Eigen::Index k = 0; k < L; ++k) {
      const double eta = lin + phi[k];
      s.A_k[k] += g.e(i, k) * std::exp(eta);
      if (g.d(i, k) != 0.0) {
        s.d_k[k] += 1;
        s.linpred_event_sum += eta;
      }
    }
  }
  for (double a : s.A_k) s.A += a;
  return s;
}

/**
 * log sum_{l=0}^{d} C(d,l) G(se+d-l)/G(se) G(sa+l)/G(sa) (A_k+re)^(l-d) (A+ra)^(-l)
 *
 * Evaluated term-by-term in log space. The binomials reach hundreds of digits
 * for realistic event counts, so the direct sum is never formed.
 */
inline double log_comb_sum(unsigned d, double shape_alpha, double shape_eps, double A_k, double A, double rate_alpha,
                           double rate_eps) {
  if (!(shape_alpha > 0.0 && shape_eps > 0.0 && rate_alpha > 0.0 && rate_eps > 0.0))
    throw std::invalid_argument("log_comb_sum needs positive shapes and rates");
  if (d == 0) return 0.0;
  const double log_ek = std::log(A_k + rate_eps);
  const double log_a = std::log(A + rate_alpha);
  const double lg_se = std::lgamma(shape_eps);
  const double lg_sa = std::lgamma(shape_alpha);
  std::vector<double> terms(d + 1);
  for (unsigned l = 0; l <= d; ++l) {
    const double t = numeric::log_binomial(d, l) + std::lgamma(shape_eps + (d - l)) - lg_se +
                     std::lgamma(shape_alpha + l) - lg_sa - static_cast<double>(d - l) * log_ek -
                     static_cast<double>(l) * log_a;
    if (!std::isfinite(t))
      throw NumericalError("non-finite term at l=" + std::to_string(l) + " of the combinatorial sum (d=" +
                           std::to_string(d) + ")");
    terms[l] = t;
  }
  return numeric::log_sum_exp(terms);
}

// Frailty hyper-parameters must sit in the model domain; the box does not guarantee
// this for finite-difference probes.
inline void check_model_domain(const ParamVector& p) {
  for (double v : p.values())
    if (!std::isfinite(v)) throw NumericalError("non-finite parameter value");
  if (!(p.mu1() > 0.0 && p.mu1() < 1.0)) throw NumericalError("mu1 outside (0,1)");
  if (!(p.nu() > 0.0)) throw NumericalError("nu must be positive");
  for (double g : p.gamma())
    if (!(g > 0.0)) throw NumericalError("gamma must be positive");
}

inline double group_loglik(const ParamVector& p, const GroupData& g) {
  check_model_domain(p);
  const auto s = group_summaries(p, g);
  const double mu1 = p.mu1();
  const double mu2 = p.mu2();
  const double nu = p.nu();
  const auto gamma = p.gamma();

  double ll = s.linpred_event_sum - (mu1 / nu) * std::log1p(nu * s.A);
  for (std::size_t k = 0; k < s.A_k.size(); ++k) ll -= (mu2 / gamma[k]) * std::log1p(gamma[k] * s.A_k[k]);
  for (std::size_t k = 0; k < s.A_k.size(); ++k)
    ll += log_comb_sum(s.d_k[k], mu1 / nu, mu2 / gamma[k], s.A_k[k], s.A, 1.0 / nu, 1.0 / gamma[k]);
  if (!std::isfinite(ll)) throw NumericalError("non-finite group log-likelihood");
  return ll;
}

// Groups may be evaluated concurrently; the sum is always taken in group order.
inline double loglik(const ParamVector& p, const ModelData& data) {
  if (!(p.layout() == data.layout())) throw std::invalid_argument("parameter layout does not match model data");
  check_model_domain(p);
  const auto& groups = data.groups();
  std::vector<double> parts(groups.size());
  const std::size_t threads = std::min(data.threads(), groups.size());
  if (threads <= 1) {
    for (std::size_t j = 0; j < groups.size(); ++j) parts[j] = group_loglik(p, groups[j]);
  } else {
    std::vector<std::future<void>> workers;
    for (std::size_t t = 0; t < threads; ++t)
      workers.push_back(std::async(std::launch::async, [&, t] {
        for (std::size_t j = t; j < groups.size(); j += threads) parts[j] = group_loglik(p, groups[j]);
      }));
    for (auto& w : workers) w.get();
  }
  double ll = 0.0;
  for (double v : parts) ll += v;
  return ll;
}

inline double loglik_along(std::size_t index, double value, const ParamVector& p, const ModelData& data) {
  if (index >= p.size()) throw std::out_of_range("parameter index " + std::to_string(index) + " out of range");
  ParamVector q = p;
  q[index] = value;
  return loglik(q, data);
}

}  // namespace frailtime
