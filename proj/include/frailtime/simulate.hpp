#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "frailtime/dataio.hpp"
#include "frailtime/numeric.hpp"
#include "frailtime/params.hpp"
#include "frailtime/timegrid.hpp"

namespace frailtime {

struct CovariateGenerator {
  enum class Kind { normal, bernoulli };
  std::string name;
  Kind kind = Kind::normal;
  double p = 0.5;  // bernoulli success probability
};

struct SimSpec {
  ParamVector truth;
  std::vector<double> time_axis;
  std::size_t N = 1;
  std::vector<std::size_t> units_per_group{1};  // one entry (shared) or N entries
  std::vector<CovariateGenerator> covariates;
  bool censor_at_end = true;  // censored times at a_L + 10% of the domain; else exactly a_L
  std::uint64_t seed = 0;
  std::optional<double> fixed_frailty;  // bypass the Gamma draws, Z_jk = value

  std::size_t group_size(std::size_t j) const {
    return units_per_group.size() == 1 ? units_per_group.front() : units_per_group.at(j);
  }

  void validate() const {
    const TimeGrid grid(time_axis);
    if (truth.layout().L != grid.intervals()) throw std::invalid_argument("truth has the wrong number of intervals");
    if (truth.layout().R != covariates.size())
      throw std::invalid_argument("truth has " + std::to_string(truth.layout().R) + " regressors but " +
                                  std::to_string(covariates.size()) + " covariate generators were given");
    if (N == 0) throw std::invalid_argument("need at least one group");
    if (units_per_group.size() != 1 && units_per_group.size() != N)
      throw std::invalid_argument("units_per_group must have 1 or N entries");
    for (std::size_t j = 0; j < N; ++j)
      if (group_size(j) == 0) throw std::invalid_argument("every group needs at least one unit");
    for (double v : truth.values())
      if (!std::isfinite(v)) throw std::invalid_argument("truth holds a non-finite value");
    if (!(truth.mu1() > 0.0 && truth.mu1() < 1.0)) throw std::invalid_argument("truth mu1 must lie in (0,1)");
    if (!(truth.nu() > 0.0)) throw std::invalid_argument("truth nu must be positive");
    for (double g : truth.gamma())
      if (!(g > 0.0)) throw std::invalid_argument("truth gamma must be positive");
    for (const auto& c : covariates) {
      if (!detail::is_identifier(c.name)) throw std::invalid_argument("invalid covariate name '" + c.name + "'");
      if (c.kind == CovariateGenerator::Kind::bernoulli && !(c.p >= 0.0 && c.p <= 1.0))
        throw std::invalid_argument("bernoulli probability must lie in [0,1]");
    }
    if (fixed_frailty && !(*fixed_frailty > 0.0)) throw std::invalid_argument("fixed frailty must be positive");
  }
};

struct Frailties {
  Eigen::VectorXd alpha;  // N
  Eigen::MatrixXd eps;    // N x L
  Eigen::MatrixXd Z;      // N x L
};

// alpha_j ~ Gamma(mu1/nu, rate 1/nu), eps_jk ~ Gamma(mu2/gamma_k, rate 1/gamma_k).
template <class Engine>
Frailties draw_frailties(const ParamVector& truth, std::size_t N, Engine& rng) {
  const auto L = static_cast<Eigen::Index>(truth.layout().L);
  const auto gamma = truth.gamma();
  Frailties f;
  f.alpha.resize(static_cast<Eigen::Index>(N));
  f.eps.resize(static_cast<Eigen::Index>(N), L);
  f.Z.resize(static_cast<Eigen::Index>(N), L);
  std::gamma_distribution<double> ga(truth.mu1() / truth.nu(), truth.nu());
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(N); ++j) {
    f.alpha(j) = ga(rng);
    for (Eigen::Index k = 0; k < L; ++k) {
      std::gamma_distribution<double> ge(truth.mu2() / gamma[k], gamma[k]);
      f.eps(j, k) = ge(rng);
      f.Z(j, k) = f.alpha(j) + f.eps(j, k);
    }
  }
  return f;
}

/**
 * Piecewise-exponential inversion: with constant hazard rate[k] on interval k,
 * walk the intervals until the cumulative hazard reaches target = -log U.
 * Returns nullopt when the target is not reached by a_L.
 */
inline std::optional<double> invert_piecewise(const TimeGrid& grid, std::span<const double> rate, double target) {
  double cum = 0.0;
  for (std::size_t k = 0; k < grid.intervals(); ++k) {
    const double step = rate[k] * grid.width(k);
    if (cum + step >= target) return grid.lower(k) + (target - cum) / rate[k];
    cum += step;
  }
  return std::nullopt;
}

struct SimResult {
  Table table;  // covariates..., time_to_event, status, group
  Frailties frailties;
};

inline SimResult simulate_dataset(const SimSpec& spec) {
  spec.validate();
  const TimeGrid grid(spec.time_axis);
  const std::size_t L = grid.intervals();
  const std::size_t R = spec.covariates.size();
  const auto phi = spec.truth.phi();
  const auto beta = spec.truth.beta();
  const double censor_time = spec.censor_at_end ? grid.end() + 0.1 * (grid.end() - grid.start()) : grid.end();

  std::mt19937_64 rng(spec.seed);
  SimResult out;
  if (spec.fixed_frailty) {
    const auto n = static_cast<Eigen::Index>(spec.N);
    out.frailties.alpha = Eigen::VectorXd::Constant(n, *spec.fixed_frailty);
    out.frailties.eps = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(L));
    out.frailties.Z = Eigen::MatrixXd::Constant(n, static_cast<Eigen::Index>(L), *spec.fixed_frailty);
  } else {
    out.frailties = draw_frailties(spec.truth, spec.N, rng);
  }

  std::vector<std::vector<std::string>> cov_cols(R);
  std::vector<std::string> times, status, group;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> x(R), rate(L);
  for (std::size_t j = 0; j < spec.N; ++j) {
    for (std::size_t i = 0; i < spec.group_size(j); ++i) {
      double lin = 0.0;
      for (std::size_t r = 0; r < R; ++r) {
        const auto& c = spec.covariates[r];
        x[r] = c.kind == CovariateGenerator::Kind::normal ? normal(rng) : (unit(rng) < c.p ? 1.0 : 0.0);
        lin += beta[r] * x[r];
        cov_cols[r].push_back(numeric::format_double(x[r]));
      }
      for (std::size_t k = 0; k < L; ++k)
        rate[k] = out.frailties.Z(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) * std::exp(lin + phi[k]);
      // 1 - U keeps the argument of log away from zero.
      const double target = -std::log(1.0 - unit(rng));
      const auto t = invert_piecewise(grid, rate, target);
      times.push_back(numeric::format_double(t ? *t : censor_time));
      status.push_back(t ? "1" : "0");
      group.push_back(std::to_string(j + 1));
    }
  }

  std::vector<std::string> names;
  std::vector<std::vector<std::string>> cols;
  for (std::size_t r = 0; r < R; ++r) {
    names.push_back(spec.covariates[r].name);
    cols.push_back(std::move(cov_cols[r]));
  }
  names.insert(names.end(), {"time_to_event", "status", "group"});
  cols.push_back(std::move(times));
  cols.push_back(std::move(status));
  cols.push_back(std::move(group));
  out.table = Table(std::move(names), std::move(cols));
  return out;
}

}  // namespace frailtime
