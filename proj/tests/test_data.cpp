#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "betasel/data.hpp"

using namespace betasel;

namespace {

Dataset toy_dataset(int n = 44) {
  Eigen::VectorXd y(n), a(n), b(n), c(n);
  for (int t = 0; t < n; ++t) {
    y[t] = 0.1 + 0.8 * (t + 0.5) / n;
    a[t] = std::sin(t + 1.0);
    b[t] = std::cos(2.0 * t);
    c[t] = (t % 5) / 4.0;
  }
  return Dataset(y, {"x2", "x3", "x4"}, {a, b, c});
}

}  // namespace

TEST_CASE("design assembly dimensions", "[data]") {
  const Dataset ds = toy_dataset(44);

  ModelSpec intercept_only;
  DesignPair d0 = build_design(ds, intercept_only);
  CHECK(d0.X.rows() == 44);
  CHECK(d0.X.cols() == 1);
  CHECK(d0.Z.cols() == 1);
  CHECK((d0.X.array() == 1.0).all());

  ModelSpec spec;
  spec.mean_terms = {"x2", "x3"};
  spec.disp_terms = {"x2"};
  DesignPair d = build_design(ds, spec);
  CHECK(d.X.rows() == 44);
  CHECK(d.X.cols() == 3);
  CHECK(d.Z.cols() == 2);
  CHECK(d.X.col(1) == ds.column("x2"));
  CHECK(d.X.col(2) == ds.column("x3"));
  CHECK(spec.r() == 3);
  CHECK(spec.s() == 2);
  CHECK(spec.k() == 5);
}

TEST_CASE("design assembly is deterministic", "[data]") {
  const Dataset ds = toy_dataset(20);
  ModelSpec spec;
  spec.mean_terms = {"x3", "x2"};
  spec.disp_terms = {"x4"};
  const DesignPair a = build_design(ds, spec);
  const DesignPair b = build_design(ds, spec);
  CHECK(a.X == b.X);
  CHECK(a.Z == b.Z);
}

TEST_CASE("duplicate and unknown columns are rejected", "[data]") {
  const Dataset ds = toy_dataset(30);
  ModelSpec dup;
  dup.mean_terms = {"x2", "x2"};
  CHECK_THROWS_WITH(build_design(ds, dup),
                    Catch::Matchers::ContainsSubstring("rank deficient") &&
                        Catch::Matchers::ContainsSubstring("x2"));

  ModelSpec unknown;
  unknown.disp_terms = {"nope"};
  CHECK_THROWS_WITH(build_design(ds, unknown),
                    Catch::Matchers::ContainsSubstring("nope"));
}

TEST_CASE("rescale_to_unit applies endpoint compression", "[data]") {
  Eigen::VectorXd raw(3);
  raw << 2.0, 4.0, 6.0;
  const Eigen::VectorXd y = rescale_to_unit(raw, 2.0, 6.0);
  // endpoints 0 and 1 are compressed by (y(n-1)+0.5)/n with n = 3
  CHECK(y[0] == Catch::Approx(0.5 / 3.0).epsilon(1e-14));
  CHECK(y[1] == 0.5);  // midpoint untouched
  CHECK(y[2] == Catch::Approx(2.5 / 3.0).epsilon(1e-14));
  for (int t = 0; t < 3; ++t) {
    CHECK(y[t] > 0.0);
    CHECK(y[t] < 1.0);
  }

  Eigen::VectorXd bad(2);
  bad << 3.0, 7.0;
  CHECK_THROWS_AS(rescale_to_unit(bad, 2.0, 6.0), std::invalid_argument);
  CHECK_THROWS_AS(rescale_to_unit(raw, 6.0, 2.0), std::invalid_argument);
}

TEST_CASE("rescale output is always interior", "[data]") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> unif(-5.0, 5.0);
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::VectorXd raw(25);
    for (int t = 0; t < 25; ++t) raw[t] = unif(gen);
    raw[0] = -5.0;  // force both endpoints to occur
    raw[1] = 5.0;
    const Eigen::VectorXd y = rescale_to_unit(raw, -5.0, 5.0);
    for (int t = 0; t < 25; ++t) {
      REQUIRE(y[t] > 0.0);
      REQUIRE(y[t] < 1.0);
    }
  }
}

TEST_CASE("CSV ingestion", "[data]") {
  std::istringstream csv(
      "y,x2,x3\n"
      "0.5,1.0,2.0\n"
      "0.25,2.0,4.5\n"
      "0.75,-1.5,0.0\n");
  const Dataset ds = Dataset::from_csv(csv, "y");
  CHECK(ds.n() == 3);
  CHECK(ds.y()[1] == 0.25);
  CHECK(ds.column("x3")[1] == 4.5);
  CHECK(ds.has_column("x2"));
  CHECK_FALSE(ds.has_column("y"));
  CHECK_THROWS_AS(ds.column("x9"), std::invalid_argument);
}

TEST_CASE("CSV ingestion error paths", "[data]") {
  std::istringstream missing(
      "y,x2\n"
      "0.5,1.0\n");
  CHECK_THROWS_WITH(Dataset::from_csv(missing, "score"),
                    Catch::Matchers::ContainsSubstring("score"));

  std::istringstream ragged(
      "y,x2\n"
      "0.5,1.0,9.0\n");
  CHECK_THROWS_AS(Dataset::from_csv(ragged, "y"), std::invalid_argument);

  std::istringstream bad_number(
      "y,x2\n"
      "0.5,abc\n");
  CHECK_THROWS_AS(Dataset::from_csv(bad_number, "y"), std::invalid_argument);

  std::istringstream boundary(
      "y,x2\n"
      "1.0,2.0\n");
  CHECK_THROWS_WITH(Dataset::from_csv(boundary, "y"),
                    Catch::Matchers::ContainsSubstring("unit interval"));
}

TEST_CASE("bundled reading ability dataset loads", "[data]") {
  const Dataset ds = Dataset::from_csv_file(
      std::string(BETASEL_DATA_DIR) + "/reading_skills.csv", "y");
  CHECK(ds.n() == 44);
  for (const char* name : {"x2", "x3", "x4", "x5", "x6"}) {
    CHECK(ds.has_column(name));
  }
  // derived columns are consistent: x4 = x2*x3, x5 = x2^2, x6 = x3*x5
  for (int t = 0; t < 44; ++t) {
    CHECK(ds.column("x4")[t] ==
          Catch::Approx(ds.column("x2")[t] * ds.column("x3")[t]));
    CHECK(ds.column("x5")[t] ==
          Catch::Approx(ds.column("x2")[t] * ds.column("x2")[t]));
    CHECK(ds.column("x6")[t] ==
          Catch::Approx(ds.column("x3")[t] * ds.column("x5")[t]));
    CHECK(std::abs(ds.column("x3")[t]) == 1.0);
  }
}
