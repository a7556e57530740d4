#include <catch_amalgamated.hpp>

#include <map>
#include <random>
#include <set>

#include "frailtime/dataio.hpp"

using namespace frailtime;
using Catch::Approx;

TEST_CASE("parse_formula: response, ordered covariates, cluster") {
  const auto f = parse_formula("time_to_event ~ Gender + CFUP + cluster(group)");
  CHECK(f.response == "time_to_event");
  CHECK(f.covariates == std::vector<std::string>{"Gender", "CFUP"});
  CHECK(f.cluster == "group");

  const auto g = parse_formula("t ~ x + cluster(g)");
  CHECK(g.response == "t");
  CHECK(g.covariates == std::vector<std::string>{"x"});
  CHECK(g.cluster == "g");

  // Cluster term may sit anywhere; whitespace is free.
  const auto h = parse_formula("  t~cluster( g )+x+y ");
  CHECK(h.covariates == std::vector<std::string>{"x", "y"});
  CHECK(h.cluster == "g");
}

TEST_CASE("parse_formula rejects malformed input") {
  CHECK_THROWS_AS(parse_formula("t ~ x + y"), DataError);
  CHECK_THROWS_AS(parse_formula("t x + cluster(g)"), DataError);
  CHECK_THROWS_AS(parse_formula("t ~ x + cluster(g) + cluster(h)"), DataError);
  CHECK_THROWS_AS(parse_formula("t ~ cluster(g)"), DataError);
  CHECK_THROWS_AS(parse_formula("t ~ x + x + cluster(g)"), DataError);
  CHECK_THROWS_AS(parse_formula("t ~ x + cluster(x)"), DataError);
  CHECK_THROWS_AS(parse_formula("t ~ x ~ y + cluster(g)"), DataError);
  CHECK_THROWS_AS(parse_formula("t ~ x + + cluster(g)"), DataError);
}

TEST_CASE("formula text round-trips") {
  const auto f = parse_formula("time_to_event ~ Gender + CFUP + cluster(group)");
  CHECK(parse_formula(f.to_string()).covariates == f.covariates);
  CHECK(f.to_string() == "time_to_event ~ Gender + CFUP + cluster(group)");
}

TEST_CASE("CSV parsing handles quoting, CRLF and embedded newlines") {
  const auto t = parse_csv("a,\"b,c\",d\r\n1,\"x\"\"y\",\"line\nbreak\"\r\n2,z,w\n");
  REQUIRE(t.rows() == 2);
  CHECK(t.names() == std::vector<std::string>{"a", "b,c", "d"});
  CHECK(t.column("b,c")[0] == "x\"y");
  CHECK(t.column("d")[0] == "line\nbreak");
  CHECK(t.column("a")[1] == "2");
}

TEST_CASE("CSV errors: ragged rows, empty fields, duplicate headers") {
  CHECK_THROWS_AS(parse_csv("a,b\n1\n"), DataError);
  CHECK_THROWS_AS(parse_csv("a,b\n1,\n"), DataError);
  CHECK_THROWS_AS(parse_csv("a,a\n1,2\n"), DataError);
  CHECK_THROWS_AS(read_csv("/nonexistent/file.csv"), DataError);
}

TEST_CASE("CSV writer output parses back to the same table") {
  const Table t({"name", "v"}, {{"plain", "has,comma", "quote\"d"}, {"1", "2", "3"}});
  const auto back = parse_csv(to_csv(t));
  CHECK(back.names() == t.names());
  CHECK(back.column("name") == t.column("name"));
  CHECK(back.column("v") == t.column("v"));
}

namespace {
Table example_table() {
  return parse_csv(
      "time,Gender,CFUP,grp,level\n"
      "2.5,Female,1,B,A\n"
      "6.1,Male,2,A,B\n"
      "1.2,Male,3,B,C\n"
      "3.3,Female,4,C,A\n");
}
}  // namespace

TEST_CASE("two-level categorical becomes one dummy with the smallest level as reference") {
  const auto ds = build_dataset(example_table(), parse_formula("time ~ Gender + cluster(grp)"));
  REQUIRE(ds.covariate_names == std::vector<std::string>{"GenderMale"});
  CHECK(ds.design(0, 0) == 0.0);
  CHECK(ds.design(1, 0) == 1.0);
  CHECK(ds.design(2, 0) == 1.0);
  CHECK(ds.design(3, 0) == 0.0);
}

TEST_CASE("three-level categorical gives g-1 indicator columns") {
  const auto ds = build_dataset(example_table(), parse_formula("time ~ level + cluster(grp)"));
  REQUIRE(ds.covariate_names == std::vector<std::string>{"levelB", "levelC"});
  CHECK(ds.design(0, 0) == 0.0);
  CHECK(ds.design(0, 1) == 0.0);
  CHECK(ds.design(1, 0) == 1.0);
  CHECK(ds.design(2, 1) == 1.0);
}

TEST_CASE("standardization gives sample mean 0 and variance 1") {
  BuildOptions opt;
  opt.standardize = true;
  const auto ds = build_dataset(example_table(), parse_formula("time ~ CFUP + cluster(grp)"), opt);
  const auto col = ds.design.col(0);
  const double mean = col.mean();
  const double var = (col.array() - mean).square().sum() / (col.size() - 1.0);
  CHECK(std::abs(mean) < 1e-10);
  CHECK(std::abs(var - 1.0) < 1e-10);

  const auto small = build_dataset(parse_csv("t,x,g\n1,1,a\n2,2,a\n3,3,b\n"), parse_formula("t ~ x + cluster(g)"), opt);
  CHECK(small.design(0, 0) == Approx(-1.0).margin(1e-12));
  CHECK(small.design(1, 0) == Approx(0.0).margin(1e-12));
  CHECK(small.design(2, 0) == Approx(1.0).margin(1e-12));
}

TEST_CASE("groups are numbered by first appearance") {
  const auto ds = build_dataset(example_table(), parse_formula("time ~ CFUP + cluster(grp)"));
  CHECK(ds.group_names == std::vector<std::string>{"B", "A", "C"});
  CHECK(ds.cluster_of == std::vector<std::size_t>{0, 1, 0, 2});
}

TEST_CASE("build_dataset errors") {
  const auto t = example_table();
  CHECK_THROWS_AS(build_dataset(t, parse_formula("time ~ missing + cluster(grp)")), DataError);
  CHECK_THROWS_AS(build_dataset(t, parse_formula("Gender ~ CFUP + cluster(grp)")), DataError);
  CHECK_THROWS_AS(build_dataset(t, parse_formula("time ~ CFUP + cluster(nope)")), DataError);
  const auto constant = parse_csv("t,c,g\n1,A,x\n2,A,y\n");
  CHECK_THROWS_AS(build_dataset(constant, parse_formula("t ~ c + cluster(g)")), DataError);
  const auto negative = parse_csv("t,x,g\n-1,1,a\n2,2,b\n");
  CHECK_THROWS_AS(build_dataset(negative, parse_formula("t ~ x + cluster(g)")), DataError);
}

TEST_CASE("resolve_censoring: sentinel convention and explicit status") {
  const std::vector<double> t{6.1, 2.5};
  CHECK(resolve_censoring(t, 6.0, std::nullopt) == std::vector<std::uint8_t>{0, 1});
  const std::vector<std::uint8_t> st{1, 0};
  CHECK(resolve_censoring(t, 6.0, st) == st);
  CHECK_THROWS_AS(resolve_censoring(t, 6.0, std::vector<std::uint8_t>{1}), DataError);
}

TEST_CASE("explicit status ignores the grid end entirely") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.1, 20.0);
  std::bernoulli_distribution b(0.5);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> t(10);
    std::vector<std::uint8_t> st(10);
    for (int i = 0; i < 10; ++i) {
      t[i] = u(rng);
      st[i] = b(rng);
    }
    CHECK(resolve_censoring(t, u(rng), st) == st);
  }
}

TEST_CASE("status column accepts 0/1 and TRUE/FALSE spellings") {
  const auto t = parse_csv("t,x,g,s\n1,1,a,1\n2,2,a,FALSE\n3,3,b,true\n");
  BuildOptions opt;
  opt.status_column = "s";
  const auto ds = build_dataset(t, parse_formula("t ~ x + cluster(g)"), opt);
  CHECK(ds.event == std::vector<std::uint8_t>{1, 0, 1});
  const auto bad = parse_csv("t,x,g,s\n1,1,a,2\n");
  CHECK_THROWS_AS(build_dataset(bad, parse_formula("t ~ x + cluster(g)"), opt), DataError);
}

TEST_CASE("random tables: dummy rows sum to at most one and group map is a bijection") {
  std::mt19937_64 rng(5);
  const std::vector<std::string> levels{"p", "q", "r", "s"};
  std::uniform_int_distribution<int> lv(0, 3), grp(0, 6);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<std::string> t, c, g;
    for (int i = 0; i < 40; ++i) {
      t.push_back(std::to_string(1 + i));
      c.push_back(levels[lv(rng)]);
      g.push_back("G" + std::to_string(grp(rng)));
    }
    const Table table({"t", "c", "g"}, {t, c, g});
    const auto ds = build_dataset(table, parse_formula("t ~ c + cluster(g)"));
    for (Eigen::Index i = 0; i < ds.design.rows(); ++i) {
      const double s = ds.design.row(i).sum();
      CHECK((s == 0.0 || s == 1.0));
    }
    std::set<std::string> labels(g.begin(), g.end());
    REQUIRE(ds.groups() == labels.size());
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(ds.group_names[ds.cluster_of[i]] == g[i]);
    std::set<std::size_t> used(ds.cluster_of.begin(), ds.cluster_of.end());
    CHECK(used.size() == ds.groups());
  }
}

TEST_CASE("apply_encoding reuses fit-time centring and levels") {
  BuildOptions opt;
  opt.standardize = true;
  const auto spec = parse_formula("time ~ CFUP + Gender + cluster(grp)");
  const auto ds = build_dataset(example_table(), spec, opt);
  const auto again = apply_encoding(example_table(), spec, ds.encoding, opt);
  CHECK(again.design == ds.design);

  const auto fresh = parse_csv("time,Gender,CFUP,grp\n1,Male,10,A\n");
  const auto one = apply_encoding(fresh, spec, ds.encoding, opt);
  const auto& c = ds.encoding.columns[0];
  CHECK(one.design(0, 0) == Approx((10.0 - c.center) / c.scale));
  CHECK(one.design(0, 1) == 1.0);

  const auto unknown = parse_csv("time,Gender,CFUP,grp\n1,Other,10,A\n");
  CHECK_THROWS_AS(apply_encoding(unknown, spec, ds.encoding, opt), DataError);
}
