#include <catch_amalgamated.hpp>

#include <random>

#include "frailtime/fit.hpp"
#include "helpers.hpp"

using namespace frailtime;
using Catch::Approx;

TEST_CASE("hessian_diag and standard errors on a known quadratic") {
  const ParamVector p(ParamLayout::make(1, 1), {1.0, 0.0, 0.5, 0.3, 0.7});
  auto ll = [](const ParamVector& q) {
    return -2.0 * (q[0] - 1.0) * (q[0] - 1.0) - 0.5 * q[1] * q[1] + q[3] * q[3];
  };
  const auto h = hessian_diag(ll, p, 1e-3);
  REQUIRE(h.size() == 5);
  CHECK(*h[0] == Approx(-4.0).epsilon(1e-6));
  CHECK(*h[1] == Approx(-1.0).epsilon(1e-6));
  CHECK(*h[2] == Approx(0.0).margin(1e-6));
  CHECK(*h[3] == Approx(2.0).epsilon(1e-6));
  const auto se = standard_errors(h);
  CHECK(*se[0] == Approx(0.5).epsilon(1e-6));
  CHECK(*se[1] == Approx(1.0).epsilon(1e-6));
  CHECK_FALSE(se[2].has_value());  // flat
  CHECK_FALSE(se[3].has_value());  // convex
}

TEST_CASE("hessian_diag leaves entries empty where a probe fails") {
  const ParamVector p(ParamLayout::make(1, 1), {0.0, 0.0, 0.5, 0.3, 0.7});
  auto ll = [](const ParamVector& q) {
    if (q[4] > 0.7) throw NumericalError("outside");
    return -q[0] * q[0];
  };
  const auto h = hessian_diag(ll, p, 1e-3);
  CHECK(h[0].has_value());
  CHECK_FALSE(h[4].has_value());
  CHECK_THROWS_AS(hessian_diag(ll, p, 0.0), std::invalid_argument);
}

TEST_CASE("confidence intervals and quantiles") {
  const std::vector<double> est{0.2178, 1.0};
  const std::vector<std::optional<double>> se{0.052, 0.0};
  const auto ci = confidence_intervals(est, se, 1.96);
  CHECK(*ci.lo[0] == Approx(0.11588).margin(1e-12));
  CHECK(*ci.hi[0] == Approx(0.31972).margin(1e-12));
  CHECK(*ci.lo[1] == 1.0);
  CHECK(*ci.hi[1] == 1.0);

  const std::vector<std::optional<double>> missing{std::nullopt, 0.1};
  const auto partial = confidence_intervals(est, missing, 1.96);
  CHECK_FALSE(partial.lo[0].has_value());
  CHECK(partial.hi[1].has_value());

  CHECK(confidence_z(0.95, true) == 1.96);
  CHECK(confidence_z(0.95) == Approx(1.959963984540054).epsilon(1e-14));
  CHECK(confidence_z(0.90) == Approx(1.6448536269514722).epsilon(1e-14));
  CHECK_THROWS_AS(confidence_z(0.9, true), std::invalid_argument);
  CHECK_THROWS_AS(confidence_intervals(est, std::vector<std::optional<double>>{0.1}, 1.96), std::invalid_argument);
}

TEST_CASE("AIC") {
  CHECK(aic(24, -2175.135) == Approx(4398.27).margin(1e-9));
  CHECK(aic(5, 0.0) == 10.0);
}

TEST_CASE("frailty dispersion and baseline hazard") {
  const ParamVector p(ParamLayout::make(2, 1), {-1.0, 0.0, 0.4, 0.5, 0.2, 0.3, 0.1});
  const auto full = frailty_dispersion(p, true);
  const auto part = frailty_dispersion(p, false);
  CHECK(full.variance[0] == Approx(0.5 * 0.2 + 0.5 * 0.3));
  CHECK(full.sd[0] == Approx(0.5));
  CHECK(full.variance[1] == Approx(0.5 * 0.2 + 0.5 * 0.1));
  CHECK(part.variance[0] == Approx(0.15));
  CHECK(part.sd[1] == Approx(std::sqrt(0.05)));
  const auto bh = baseline_hazard(p);
  CHECK(bh[0] == Approx(std::exp(-1.0)));
  CHECK(bh[1] == 1.0);
}

namespace {
// Y_k by direct comparison with the right end of each interval; the last interval is closed.
double at_risk_oracle(double t, const std::vector<double>& a, std::size_t k) {
  const std::size_t L = a.size() - 1;
  return (t > a[k + 1] || (t == a[k + 1] && k + 1 < L)) ? 1.0 : 0.0;
}

double posterior_second_moment(double shape, double rate, double n, double h) {
  const double num =
      oracle::gamma_expectation(shape, rate, [&](double x) { return std::pow(x, n + 2.0) * std::exp(-h * x); });
  const double den = oracle::gamma_expectation(shape, rate, [&](double x) { return std::pow(x, n) * std::exp(-h * x); });
  return num / den;
}
}  // namespace

TEST_CASE("posterior frailty matches Bayes' rule by quadrature") {
  const std::vector<double> a{0.0, 1.0, 2.0};
  const std::vector<oracle::Unit> units{{0.5, true, {0.3}}, {1.5, true, {-0.2}}, {2.5, false, {1.0}}};
  const oracle::Params op{{-0.7, -0.2}, {0.4}, {0.3, 0.8}, 0.35, 0.25};
  const auto ds = testing::make_dataset({units}, 1);
  const ModelData data(ds, TimeGrid(a));
  const auto p = testing::to_param_vector(op);
  const auto pf = posterior_frailty(p, data);

  std::vector<double> n(2, 0.0), h(2, 0.0);
  for (const auto& u : units) {
    const int ke = oracle::event_interval(u, a);
    for (std::size_t k = 0; k < 2; ++k) {
      if (ke == static_cast<int>(k)) n[k] += 1.0;
      h[k] += oracle::clip_exposure(u.t, a[k], a[k + 1]) * at_risk_oracle(u.t, a, k) *
              std::exp(op.phi[k] + op.beta[0] * u.x[0]);
    }
  }
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(pf.events(0, k) == n[k]);
    CHECK(pf.hazard(0, k) == Approx(h[k]).epsilon(1e-12));
  }

  const double sa = op.mu1 / op.nu, ra = 1.0 / op.nu;
  const double ma = oracle::posterior_mean(sa, ra, n[0] + n[1], h[0] + h[1]);
  CHECK(pf.alpha_raw(0) == Approx(ma).epsilon(1e-4));
  const double va = posterior_second_moment(sa, ra, n[0] + n[1], h[0] + h[1]) - ma * ma;
  CHECK(pf.var_alpha(0) * pf.alpha_max * pf.alpha_max == Approx(va).epsilon(1e-4));
  for (std::size_t k = 0; k < 2; ++k) {
    const double se = op.mu2() / op.gamma[k], re = 1.0 / op.gamma[k];
    const double me = oracle::posterior_mean(se, re, n[k], h[k]);
    CHECK(pf.eps_raw(0, k) == Approx(me).epsilon(1e-4));
    const double ve = posterior_second_moment(se, re, n[k], h[k]) - me * me;
    CHECK(pf.var_eps(0, k) * pf.eps_max * pf.eps_max == Approx(ve).epsilon(1e-4));
  }
  CHECK(pf.alpha(0) == 1.0);
}

TEST_CASE("posterior frailty: empty history returns the prior means") {
  const std::vector<double> a{0.0, 1.0, 2.0};
  const std::vector<std::vector<oracle::Unit>> groups{{{0.0, false, {0.1}}, {0.0, false, {-1.0}}},
                                                      {{0.7, true, {0.0}}, {1.9, false, {0.5}}}};
  const oracle::Params op{{-0.5, -0.4}, {0.2}, {0.3, 0.6}, 0.45, 0.2};
  const ModelData data(testing::make_dataset(groups, 1), TimeGrid(a));
  const auto pf = posterior_frailty(testing::to_param_vector(op), data);
  CHECK(pf.alpha_raw(0) == op.mu1);
  CHECK(pf.eps_raw(0, 0) == op.mu2());
  CHECK(pf.eps_raw(0, 1) == op.mu2());
}

TEST_CASE("posterior frailty: normalization and intervals on random data") {
  std::mt19937_64 rng(23);
  const std::vector<double> axis{0.0, 1.0, 2.0, 3.0};
  for (int rep = 0; rep < 10; ++rep) {
    const auto ds = testing::random_dataset(rng, 6, 8, axis, 2);
    const ModelData data(ds, TimeGrid(axis));
    const auto b = expand_bounds(testing::kRangeMin, testing::kRangeMax, data.layout());
    const auto pf = posterior_frailty(random_init(b, rng), data);
    CHECK(pf.alpha.maxCoeff() == 1.0);
    CHECK(pf.eps.maxCoeff() == 1.0);
    CHECK(pf.Z.minCoeff() > 0.0);
    CHECK(pf.Z.maxCoeff() <= 2.0);
    CHECK((pf.ci_hi - pf.Z).isApprox(pf.Z - pf.ci_lo));
    CHECK((pf.ci_hi - pf.Z).isApprox((pf.var_Z.array().sqrt() * 1.96).matrix()));
    CHECK(pf.mean_Z() == Approx(pf.Z.mean()));
  }
}

TEST_CASE("conditional survival: closed form, multiplicativity, monotonicity") {
  Dataset ds;
  ds.design = Eigen::MatrixXd::Zero(1, 1);
  ds.cluster_of = {0};
  ds.group_names = {"only"};
  ds.time = {1.0};
  ds.event = {0};

  const ParamVector p1(ParamLayout::make(1, 1), {0.0, 0.7, 0.5, 0.5, 0.5});
  const auto s1 = conditional_survival(p1, Eigen::MatrixXd::Ones(1, 1), ds, TimeGrid({0.0, 1.0}));
  CHECK(s1.S(0, 0) == Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(s1.group == std::vector<std::string>{"only"});

  const ParamVector p2(ParamLayout::make(2, 1), {-0.3, -0.3, 0.7, 0.5, 0.5, 0.5, 0.5});
  const auto s2 = conditional_survival(p2, Eigen::MatrixXd::Constant(1, 2, 0.8), ds, TimeGrid({0.0, 1.0, 2.0}));
  CHECK(s2.S(0, 1) == Approx(s2.S(0, 0) * s2.S(0, 0)).epsilon(1e-14));

  std::mt19937_64 rng(31);
  const std::vector<double> axis{0.0, 0.5, 1.5, 3.0};
  const auto rd = testing::random_dataset(rng, 5, 10, axis, 2);
  const ModelData data(rd, TimeGrid(axis));
  const auto b = expand_bounds(testing::kRangeMin, testing::kRangeMax, data.layout());
  const auto p = random_init(b, rng);
  const auto pf = posterior_frailty(p, data);
  const auto s = conditional_survival(p, pf.Z, rd, TimeGrid(axis));
  for (Eigen::Index i = 0; i < s.S.rows(); ++i) {
    CHECK(s.S(i, 0) <= 1.0);
    CHECK(s.S(i, 0) > 0.0);
    for (Eigen::Index k = 1; k < s.S.cols(); ++k) CHECK(s.S(i, k) <= s.S(i, k - 1));
  }
  CHECK_THROWS_AS(conditional_survival(p, Eigen::MatrixXd::Ones(5, 2), rd, TimeGrid(axis)), std::invalid_argument);
}

TEST_CASE("fit: reported quantities agree with each other") {
  std::mt19937_64 rng(41);
  const std::vector<double> axis{0.0, 1.0, 2.0};
  const auto ds = testing::random_dataset(rng, 5, 15, axis, 1);
  FitOptions opt;
  opt.seed = 7;
  opt.n_extrarun = 5;
  const auto r = fit(ds, TimeGrid(axis), testing::kRangeMin, testing::kRangeMax, opt);
  const ModelData data(ds, TimeGrid(axis));
  CHECK(r.loglik == loglik(r.params, data));
  CHECK(r.aic == 2.0 * r.params.size() - 2.0 * r.loglik);
  CHECK(r.params.within(r.bounds));
  CHECK(r.trace.run_lls.size() == r.n_run);
  CHECK(r.z == confidence_z(0.95));
  for (std::size_t i = 0; i < r.params.size(); ++i) {
    if (!r.se[i]) continue;
    CHECK(*r.ci.lo[i] == Approx(r.params[i] - r.z * *r.se[i]));
    CHECK(*r.ci.hi[i] == Approx(r.params[i] + r.z * *r.se[i]));
  }
  CHECK(r.baseline_hazard[1] == Approx(std::exp(r.params.phi()[1])));
  CHECK(r.dispersion_full.variance[0] ==
        Approx(r.params.mu1() * r.params.nu() + r.params.mu2() * r.params.gamma()[0]));
  CHECK(&r.dispersion() == &r.dispersion_full);
  CHECK(r.group_names == ds.group_names);
  CHECK(r.n_units == ds.units());
}
