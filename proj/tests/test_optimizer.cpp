#include <catch_amalgamated.hpp>

#include <random>

#include "frailtime/fit.hpp"
#include "frailtime/optimizer.hpp"
#include "helpers.hpp"

using namespace frailtime;
using Catch::Approx;

TEST_CASE("brent_max: interior, boundary and trigonometric maxima") {
  const auto q = brent_max([](double x) { return -(x - 2.0) * (x - 2.0); }, 0.0, 5.0, 1e-8);
  CHECK(q.x == Approx(2.0).margin(1e-7));
  CHECK(q.f == Approx(0.0).margin(1e-13));

  const auto m = brent_max([](double x) { return x; }, 0.0, 1.0, 1e-6);
  CHECK(m.x <= 1.0);
  CHECK(m.x >= 1.0 - 1e-6);

  // Dense-grid argmax as the reference.
  double best_x = 0, best_f = -1;
  for (int i = 0; i <= 200000; ++i) {
    const double x = M_PI * i / 200000.0;
    if (std::sin(x) > best_f) best_f = std::sin(x), best_x = x;
  }
  const auto s = brent_max([](double x) { return std::sin(x); }, 0.0, M_PI, 1e-8);
  CHECK(s.x == Approx(best_x).margin(1e-4));
  CHECK(s.f == Approx(best_f).epsilon(1e-12));
}

TEST_CASE("brent_max: argument checks and non-finite objective") {
  CHECK_THROWS_AS(brent_max([](double x) { return x; }, 1.0, 0.0, 1e-6), std::invalid_argument);
  CHECK_THROWS_AS(brent_max([](double x) { return x; }, 0.0, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(brent_max([](double) { return std::nan(""); }, 0.0, 1.0, 1e-6), NumericalError);
}

TEST_CASE("brent_max never leaves the bracket and never evaluates its ends") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int rep = 0; rep < 100; ++rep) {
    double lo = u(rng), hi = u(rng);
    if (lo > hi) std::swap(lo, hi);
    if (hi - lo < 1e-3) continue;
    const double c = u(rng) * 2;
    bool inside = true;
    const auto r = brent_max(
        [&](double x) {
          inside = inside && x > lo && x < hi;
          return -std::abs(x - c) - 0.1 * std::cos(3 * x);
        },
        lo, hi, 1e-6);
    CHECK(inside);
    CHECK(r.x >= lo);
    CHECK(r.x <= hi);
  }
}

namespace {
ParamBounds box(std::size_t L, std::size_t R) {
  return expand_bounds({-5, -5, 0.01, 0.01, 0.01}, {5, 5, 0.99, 5, 5}, ParamLayout::make(L, R));
}
}  // namespace

TEST_CASE("coordinate_run: separable objective lands every coordinate in one pass") {
  const auto b = box(2, 1);
  std::vector<double> c{1.0, -2.0, 0.5, 0.3, 2.0, 1.5, 3.0};
  auto ll = [&](const ParamVector& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s -= (p[i] - c[i]) * (p[i] - c[i]);
    return s;
  };
  std::vector<std::size_t> order(7);
  std::iota(order.begin(), order.end(), 0);
  const auto out = coordinate_run(random_init(b, 1), order, b, ll, 1e-9);
  for (std::size_t i = 0; i < 7; ++i) CHECK(out[i] == Approx(c[i]).margin(1e-6));

  // Targets outside the box end at the nearer bound.
  // Layout (2,1): phi 0-1, beta 2, mu1 3, nu 4, gamma 5-6.
  c = {9.0, -9.0, 2.0, 2.0, -1.0, 1.0, 1.0};
  const auto pinned = coordinate_run(random_init(b, 2), order, b, ll, 1e-9);
  CHECK(pinned[0] == Approx(5.0).margin(1e-6));
  CHECK(pinned[1] == Approx(-5.0).margin(1e-6));
  CHECK(pinned[2] == Approx(2.0).margin(1e-6));
  CHECK(pinned[3] == Approx(0.99).margin(1e-6));
  CHECK(pinned[4] == Approx(0.01).margin(1e-6));
  CHECK(pinned.within(b));
}

TEST_CASE("coordinate_run: non-separable concave quadratic never decreases") {
  std::mt19937_64 rng(5);
  const auto b = box(2, 2);
  const std::size_t n = b.layout.size();
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const Eigen::MatrixXd Q = M * M.transpose() + 0.1 * Eigen::MatrixXd::Identity(M.rows(), M.cols());
    const Eigen::VectorXd c = Eigen::VectorXd::Random(M.rows());
    auto ll = [&](const ParamVector& p) {
      Eigen::VectorXd v(M.rows());
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = p[static_cast<std::size_t>(i)] - c(i);
      return -v.dot(Q * v);
    };
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const auto p0 = random_init(b, rng);
    const auto p1 = coordinate_run(p0, order, b, ll, 1e-8);
    CHECK(ll(p1) >= ll(p0));
    CHECK(p1.within(b));
  }
}

TEST_CASE("coordinate_run wraps failures with the parameter index") {
  const auto b = box(1, 1);
  // Increasing in beta, undefined past 1: the search on index 1 must hit the hole.
  auto ll = [](const ParamVector& p) { return p[1] > 1.0 ? std::nan("") : p[1]; };
  const ParamVector start(b.layout, {0.0, 0.0, 0.5, 1.0, 1.0});
  try {
    (void)coordinate_run(start, std::vector<std::size_t>{0, 1, 2, 3, 4}, b, ll, 1e-6);
    FAIL("expected a NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("parameter index 1") != std::string::npos);
  }
}

TEST_CASE("maximize_in_box: huge tol_ll stops after two runs") {
  const auto b = box(1, 1);
  auto ll = [](const ParamVector& p) { return -(p[0] - 1) * (p[0] - 1) - (p[1] + 1) * (p[1] + 1); };
  FitOptions opt;
  opt.tol_ll = 1e12;
  const auto out = maximize_in_box(b, ll, opt);
  CHECK(out.trace.n_run == 2);
  CHECK(out.trace.converged);
}

TEST_CASE("maximize_in_box: budget exhaustion reports non-convergence") {
  const auto b = box(1, 1);
  int calls = 0;
  // A drifting objective never settles between runs.
  auto ll = [&](const ParamVector& p) { return -(p[0] - 1) * (p[0] - 1) + 1e-3 * (++calls); };
  FitOptions opt;
  opt.n_extrarun = 2;
  const auto out = maximize_in_box(b, ll, opt);
  CHECK(out.trace.n_run == b.layout.size() + 2);
  CHECK_FALSE(out.trace.converged);
}

TEST_CASE("maximize_in_box on the model: monotone runs, feasible iterates, deterministic") {
  std::mt19937_64 rng(17);
  const std::vector<double> axis{0.0, 1.0, 2.0, 3.0};
  const auto ds = testing::random_dataset(rng, 4, 12, axis, 2);
  const ModelData data(ds, TimeGrid(axis));
  const auto b = expand_bounds(testing::kRangeMin, testing::kRangeMax, data.layout());
  bool feasible = true;
  auto ll = [&](const ParamVector& p) {
    feasible = feasible && p.within(b);
    return loglik(p, data);
  };
  FitOptions opt;
  opt.seed = 99;
  const auto a = maximize_in_box(b, ll, opt);
  CHECK(feasible);
  CHECK(a.params.within(b));
  double best = -std::numeric_limits<double>::infinity();
  for (double v : a.trace.run_lls) {
    CHECK(v >= best);
    best = std::max(best, v);
  }
  CHECK(a.loglik == best);
  const auto again = maximize_in_box(b, ll, opt);
  CHECK(again.params == a.params);
  CHECK(again.loglik == a.loglik);
  CHECK(again.trace.run_lls == a.trace.run_lls);
}

TEST_CASE("FitOptions validation") {
  FitOptions o;
  CHECK_NOTHROW(o.validate());
  o.tol_ll = 0;
  CHECK_THROWS_AS(o.validate(), std::invalid_argument);
  o = FitOptions{};
  o.level = 1.0;
  CHECK_THROWS_AS(o.validate(), std::invalid_argument);
  o = FitOptions{};
  o.h_dd = -1;
  CHECK_THROWS_AS(o.validate(), std::invalid_argument);
}
