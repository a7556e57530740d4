#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "frailtime/frailtime.hpp"
#include "oracles.hpp"

namespace testing {

// Dataset straight from per-group unit lists (group j gets label "g<j>").
inline frailtime::Dataset make_dataset(const std::vector<std::vector<oracle::Unit>>& groups, std::size_t R) {
  frailtime::Dataset ds;
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  ds.design.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(R));
  Eigen::Index row = 0;
  for (std::size_t j = 0; j < groups.size(); ++j) {
    ds.group_names.push_back("g" + std::to_string(j));
    for (const auto& u : groups[j]) {
      for (std::size_t r = 0; r < R; ++r) ds.design(row, static_cast<Eigen::Index>(r)) = u.x[r];
      ds.cluster_of.push_back(j);
      ds.time.push_back(u.t);
      ds.event.push_back(u.event ? 1 : 0);
      ++row;
    }
  }
  for (std::size_t r = 0; r < R; ++r) ds.covariate_names.push_back("x" + std::to_string(r + 1));
  return ds;
}

inline frailtime::ParamVector to_param_vector(const oracle::Params& p) {
  std::vector<double> v = p.phi;
  v.insert(v.end(), p.beta.begin(), p.beta.end());
  v.push_back(p.mu1);
  v.push_back(p.nu);
  v.insert(v.end(), p.gamma.begin(), p.gamma.end());
  return frailtime::ParamVector(frailtime::ParamLayout::make(p.phi.size(), p.beta.size()), v);
}

// Category ranges used throughout the worked example of the method.
inline constexpr double kEps = 1e-10;
inline const std::array<double, 5> kRangeMin{-8.0, -2.0, kEps, kEps, kEps};
inline const std::array<double, 5> kRangeMax{-kEps, 0.5, 1.0 - kEps, 1.0, 10.0};

// Random dataset: times uniform over [a_0, a_L * 1.1], events where inside the domain.
inline frailtime::Dataset random_dataset(std::mt19937_64& rng, std::size_t N, std::size_t per_group,
                                         const std::vector<double>& axis, std::size_t R) {
  std::uniform_real_distribution<double> t(axis.front(), axis.back() * 1.1);
  std::normal_distribution<double> z(0.0, 1.0);
  std::bernoulli_distribution coin(0.7);
  std::vector<std::vector<oracle::Unit>> groups(N);
  for (auto& g : groups)
    for (std::size_t i = 0; i < per_group; ++i) {
      oracle::Unit u{t(rng), false, {}};
      u.event = u.t <= axis.back() && coin(rng);
      for (std::size_t r = 0; r < R; ++r) u.x.push_back(z(rng));
      g.push_back(u);
    }
  return make_dataset(groups, R);
}

}  // namespace testing
