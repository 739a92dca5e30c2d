#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "betasel/beta.hpp"
#include "betasel/estimation.hpp"
#include "golden_fit.hpp"

using namespace betasel;

namespace {

Dataset golden_dataset() {
  const int n = static_cast<int>(golden::kY.size());
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(golden::kY.data(), n);
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(golden::kA.data(), n);
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(golden::kB.data(), n);
  return Dataset(y, {"a", "b"}, {a, b});
}

Dataset reading_dataset() {
  return Dataset::from_csv_file(
      std::string(BETASEL_DATA_DIR) + "/reading_skills.csv", "y");
}

ModelSpec reading_spec() {
  ModelSpec spec;
  spec.mean_terms = {"x3", "x5", "x6"};
  spec.disp_terms = {"x2", "x3", "x4", "x5"};
  return spec;
}

// synthetic dataset for gradient and property checks
Dataset synthetic_dataset(std::uint64_t seed, int n = 50) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd a(n), b(n), y(n);
  for (int t = 0; t < n; ++t) {
    a[t] = unif(gen);
    b[t] = unif(gen);
    const double mu = link_inverse(Link::logit, 0.4 - 0.9 * a[t] + 0.5 * b[t]);
    const double sg = link_inverse(Link::logit, -0.8 - 0.6 * a[t]);
    y[t] = sample(BetaParams(mu, sg), gen);
  }
  return Dataset(y, {"a", "b"}, {a, b});
}

}  // namespace

TEST_CASE("loglik of a single uniform observation is zero", "[estimation]") {
  // mu = 0.5, phi = 2 is the uniform law whatever the observation
  Eigen::VectorXd y(1);
  y << 0.3;
  const Dataset ds(y, {}, {});
  ModelSpec spec;
  Eigen::VectorXd beta(1), gamma(1);
  beta << 0.0;                                       // logit(0.5)
  gamma << link_eval(Link::logit, std::sqrt(1.0 / 3.0));  // sigma^2 = 1/3
  CHECK(loglik(ds, spec, beta, gamma) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("loglik equals the sum of log densities", "[estimation]") {
  const Dataset ds = synthetic_dataset(7);
  ModelSpec spec;
  spec.mean_terms = {"a", "b"};
  spec.disp_terms = {"a"};
  Eigen::VectorXd beta(3), gamma(2);
  beta << 0.3, -0.8, 0.4;
  gamma << -0.6, -0.4;
  const DesignPair d = build_design(ds, spec);
  double expected = 0.0;
  for (int t = 0; t < ds.n(); ++t) {
    const double mu = link_inverse(Link::logit, d.X.row(t) * beta);
    const double sg = link_inverse(Link::logit, d.Z.row(t) * gamma);
    expected += log_density(ds.y()[t], BetaParams(mu, sg));
  }
  CHECK(loglik(ds, spec, beta, gamma) ==
        Catch::Approx(expected).margin(1e-10));
}

TEST_CASE("analytic score matches central finite differences",
          "[estimation]") {
  const Dataset ds = synthetic_dataset(11);
  ModelSpec spec;
  spec.mean_terms = {"a", "b"};
  spec.disp_terms = {"a"};
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> unif(-1.2, 1.2);

  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd beta(3), gamma(2);
    for (int i = 0; i < 3; ++i) beta[i] = unif(gen);
    gamma << -0.8 + 0.5 * unif(gen), 0.5 * unif(gen);
    const Eigen::VectorXd g = score(ds, spec, beta, gamma);
    Eigen::VectorXd theta(5);
    theta << beta, gamma;
    for (int i = 0; i < 5; ++i) {
      const double h = 1e-6;
      Eigen::VectorXd tp = theta, tm = theta;
      tp[i] += h;
      tm[i] -= h;
      const double fd = (loglik(ds, spec, tp.head(3), tp.tail(2)) -
                         loglik(ds, spec, tm.head(3), tm.tail(2))) /
                        (2.0 * h);
      const double rel =
          std::abs(g[i] - fd) / std::max(1.0, std::abs(g[i]));
      worst = std::max(worst, rel);
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("score flips sign under the y -> 1-y reflection", "[estimation]") {
  const Dataset base = synthetic_dataset(23);
  ModelSpec spec;
  spec.mean_terms = {"a"};
  spec.disp_terms = {"a"};

  Eigen::VectorXd y_flip = 1.0 - base.y().array();
  const Dataset flipped(y_flip, {"a", "b"},
                        {base.column("a"), base.column("b")});

  Eigen::VectorXd beta(2), gamma(2);
  beta << 0.37, -0.52;
  gamma << -0.61, -0.33;
  const Eigen::VectorXd g1 = score(base, spec, beta, gamma);
  const Eigen::VectorXd g2 = score(flipped, spec, -beta, gamma);
  // mean-submodel components flip sign, dispersion components are invariant
  CHECK(g1[0] == Catch::Approx(-g2[0]).margin(1e-9));
  CHECK(g1[1] == Catch::Approx(-g2[1]).margin(1e-9));
  CHECK(g1[2] == Catch::Approx(g2[2]).margin(1e-9));
  CHECK(g1[3] == Catch::Approx(g2[3]).margin(1e-9));
}

TEST_CASE("fit_mle recovers the independently computed optimum",
          "[estimation]") {
  const Dataset ds = golden_dataset();
  ModelSpec spec;
  spec.mean_terms = {"a", "b"};
  spec.disp_terms = {"a"};
  const FitResult fit = fit_mle(ds, spec);
  REQUIRE(fit.converged);
  CHECK(fit.grad_norm <= 1e-7);
  CHECK(fit.loglik == Catch::Approx(golden::kLoglik).margin(1e-8));
  const Eigen::VectorXd th = fit.theta();
  for (int i = 0; i < 5; ++i) {
    CHECK(th[i] == Catch::Approx(golden::kThetaHat[static_cast<std::size_t>(i)])
                       .margin(2e-6));
  }
  // first-order condition at the reported maximizer
  const Eigen::VectorXd g = score(ds, spec, fit.beta_hat, fit.gamma_hat);
  CHECK(g.lpNorm<Eigen::Infinity>() <= 1e-6);
  // fitted values are interior
  CHECK(fit.mu_hat.minCoeff() > 0.0);
  CHECK(fit.mu_hat.maxCoeff() < 1.0);
  CHECK(fit.sigma_hat.minCoeff() > 0.0);
  CHECK(fit.sigma_hat.maxCoeff() < 1.0);
}

TEST_CASE("reading ability fit reproduces the frozen reference",
          "[estimation][reading]") {
  const Dataset ds = reading_dataset();
  const FitResult fit = fit_mle(ds, reading_spec());
  REQUIRE(fit.converged);

  // reference values from an independently implemented, fully converged
  // optimizer on the same data (score max-norm 2e-10 at the optimum)
  const double theta_ref[] = {
      1.0499339076900338,  -0.8598018307934435, 0.4522809817078592,
      -0.38608585121818306, -1.0067316689092736, -0.9270692652118475,
      -0.9049154489892054, -0.858503937075304,  -1.1027702047148387};
  const double se_ref[] = {
      0.160167772181453,   0.1590592333430546,  0.05808126646952696,
      0.05838212911240642, 0.18321054978368462, 0.1525671943836748,
      0.1593733766926093,  0.2797937346147435,  0.2209194645279581};
  const Eigen::VectorXd th = fit.theta();
  for (int i = 0; i < 9; ++i) {
    CHECK(th[i] == Catch::Approx(theta_ref[i]).margin(1e-5));
  }
  CHECK(fit.loglik == Catch::Approx(72.99157777596893).margin(1e-7));
  REQUIRE(fit.std_errors.size() == 9);
  for (int i = 0; i < 9; ++i) {
    CHECK(fit.std_errors[i] == Catch::Approx(se_ref[i]).margin(1e-5));
  }
}

TEST_CASE("intercept-only fit on symmetric data is centered",
          "[estimation]") {
  std::mt19937_64 gen(31);
  const int n = 400;
  Eigen::VectorXd y(n);
  const BetaParams p(0.5, 0.4);
  for (int t = 0; t < n; ++t) y[t] = sample(p, gen);
  const Dataset ds(y, {}, {});
  const FitResult fit = fit_mle(ds, ModelSpec{});
  REQUIRE(fit.converged);
  REQUIRE(fit.std_errors.size() == 2);
  // beta_1 ~ 0 within 3 standard errors (logit(0.5) = 0)
  CHECK(std::abs(fit.beta_hat[0]) <= 3.0 * fit.std_errors[0]);
}

TEST_CASE("loglik never falls below the nested intercept-only fit",
          "[estimation]") {
  const Dataset ds = synthetic_dataset(41);
  const FitResult null_fit = fit_mle(ds, ModelSpec{});
  ModelSpec bigger;
  bigger.mean_terms = {"a"};
  const FitResult f1 = fit_mle(ds, bigger);
  bigger.mean_terms = {"a", "b"};
  bigger.disp_terms = {"a"};
  const FitResult f2 = fit_mle(ds, bigger);
  CHECK(f1.loglik >= null_fit.loglik - 1e-6);
  CHECK(f2.loglik >= f1.loglik - 1e-6);
}

TEST_CASE("rescaling a covariate rescales only its coefficient",
          "[estimation]") {
  const Dataset ds = synthetic_dataset(43);
  const double c = 37.5;
  Eigen::VectorXd scaled_a = c * ds.column("a");
  const Dataset scaled(ds.y(), {"a", "b"}, {scaled_a, ds.column("b")});

  ModelSpec spec;
  spec.mean_terms = {"a", "b"};
  spec.disp_terms = {"a"};
  const FitResult f0 = fit_mle(ds, spec);
  const FitResult f1 = fit_mle(scaled, spec);
  REQUIRE(f0.converged);
  REQUIRE(f1.converged);
  CHECK(f1.loglik == Catch::Approx(f0.loglik).margin(1e-8));
  CHECK(f1.beta_hat[1] == Catch::Approx(f0.beta_hat[1] / c).margin(1e-8));
  CHECK(f1.beta_hat[0] == Catch::Approx(f0.beta_hat[0]).margin(1e-6));
  CHECK(f1.gamma_hat[1] == Catch::Approx(f0.gamma_hat[1] / c).margin(1e-8));
  for (int t = 0; t < ds.n(); ++t) {
    CHECK(f1.mu_hat[t] == Catch::Approx(f0.mu_hat[t]).margin(1e-8));
    CHECK(f1.sigma_hat[t] == Catch::Approx(f0.sigma_hat[t]).margin(1e-8));
  }
}

TEST_CASE("wald table", "[estimation]") {
  const Dataset ds = reading_dataset();
  const FitResult fit = fit_mle(ds, reading_spec());
  REQUIRE(fit.std_errors.size() == 9);

  SECTION("z statistics") {
    // z = estimate / std. error
    const auto rows = wald_table(fit);
    CHECK(rows.size() == 9);
    for (const auto& row : rows) {
      CHECK(row.z == Catch::Approx(row.estimate / row.std_error));
    }
    // the dyslexia-by-iq interaction row of the dispersion submodel
    CHECK(-0.8559 / 0.2633 == Catch::Approx(-3.251).margin(5e-4));
  }

  SECTION("degenerate estimate gives z = 0, p = 1") {
    FitResult tweaked = fit;
    tweaked.beta_hat[1] = 0.0;
    const auto rows = wald_table(tweaked);
    CHECK(rows[1].z == 0.0);
    CHECK(rows[1].p == Catch::Approx(1.0));
  }

  SECTION("normal and t reference distributions") {
    FitResult pinned = fit;
    pinned.beta_hat.setZero();
    pinned.gamma_hat.setZero();
    pinned.beta_hat[0] = -0.8559;
    pinned.std_errors.setConstant(1.0);
    pinned.std_errors[0] = 0.2633;
    const auto norm_rows = wald_table(pinned, RefDist::normal);
    const auto t_rows = wald_table(pinned, RefDist::student_t);
    CHECK(norm_rows[0].z == Catch::Approx(-3.251).margin(5e-4));
    // frozen two-sided references: 2*Phi(-3.251) and 2*F_t35(-3.251)
    CHECK(norm_rows[0].p == Catch::Approx(0.00115135581850736).margin(2e-6));
    CHECK(t_rows[0].p == Catch::Approx(0.002547657270307097).margin(2e-6));
    CHECK(t_rows[0].p == Catch::Approx(0.0025).margin(1e-4));
  }

  SECTION("absent standard errors are an error") {
    FitResult bare = fit;
    bare.std_errors.resize(0);
    CHECK_THROWS_AS(wald_table(bare), std::runtime_error);
  }
}

TEST_CASE("score test for constant dispersion on the reading data",
          "[estimation][reading]") {
  const Dataset ds = reading_dataset();
  ModelSpec spec;
  spec.mean_terms = {"x2", "x3", "x4"};
  spec.disp_terms = {"x2", "x3", "x4"};
  const ScoreTestResult res = score_test_constant_dispersion(ds, spec);
  CHECK(res.df == 3);
  // frozen from the independent implementation: S = 18.0808, p = 4.233e-4
  CHECK(res.statistic == Catch::Approx(18.080800474481634).margin(1e-4));
  CHECK(res.p_value == Catch::Approx(0.0004232900432440298).margin(1e-6));
}

TEST_CASE("score test error paths", "[estimation]") {
  const Dataset ds = synthetic_dataset(47);
  ModelSpec no_candidates;
  CHECK_THROWS_AS(score_test_constant_dispersion(ds, no_candidates),
                  std::invalid_argument);

  // a dispersion column identical to the intercept is a rank error
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(ds.n());
  const Dataset with_ones(ds.y(), {"a", "b", "one"},
                          {ds.column("a"), ds.column("b"), ones});
  ModelSpec collinear;
  collinear.disp_terms = {"one"};
  CHECK_THROWS_WITH(score_test_constant_dispersion(with_ones, collinear),
                    Catch::Matchers::ContainsSubstring("rank deficient"));
}

TEST_CASE("score statistic is nonnegative across random datasets",
          "[estimation]") {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const Dataset ds = synthetic_dataset(seed, 40);
    ModelSpec spec;
    spec.mean_terms = {"a"};
    spec.disp_terms = {"a", "b"};
    const ScoreTestResult res = score_test_constant_dispersion(ds, spec);
    REQUIRE(res.statistic >= 0.0);
    REQUIRE(res.p_value >= 0.0);
    REQUIRE(res.p_value <= 1.0);
  }
}

TEST_CASE("score test has roughly nominal size under the null",
          "[estimation][slow]") {
  // constant-dispersion DGP; the rejection rate at the 5% level should be
  // close to 5%, and the statistic close in distribution to chi-squared(2)
  std::mt19937_64 gen(71);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int n = 50;
  Eigen::VectorXd a(n), b(n);
  for (int t = 0; t < n; ++t) {
    a[t] = unif(gen);
    b[t] = unif(gen);
  }
  const int reps = 2000;
  std::vector<double> stats(reps);
  int rejections = 0;
  int failures = 0;
  for (int rep = 0; rep < reps; ++rep) {
    Eigen::VectorXd y(n);
    for (int t = 0; t < n; ++t) {
      const double mu = link_inverse(Link::logit, 0.5 - 1.0 * a[t]);
      y[t] = sample(BetaParams(mu, 0.35), gen);
    }
    const Dataset ds(y, {"a", "b"}, {a, b});
    ModelSpec spec;
    spec.mean_terms = {"a"};
    spec.disp_terms = {"a", "b"};
    try {
      const ScoreTestResult res = score_test_constant_dispersion(ds, spec);
      stats[static_cast<std::size_t>(rep)] = res.statistic;
      if (res.p_value < 0.05) ++rejections;
    } catch (const std::exception&) {
      ++failures;
      stats[static_cast<std::size_t>(rep)] = 0.0;
    }
  }
  REQUIRE(failures <= reps / 100);
  const double rate = static_cast<double>(rejections) / (reps - failures);
  // binomial 3-sigma band around 0.05 at 2000 replications is +/- 0.015
  CHECK(rate == Catch::Approx(0.05).margin(0.02));

  // Kolmogorov-Smirnov distance to chi-squared(2) at the 1% level
  std::sort(stats.begin(), stats.end());
  boost::math::chi_squared_distribution<double> chi2(2.0);
  double ks = 0.0;
  for (int i = 0; i < reps; ++i) {
    const double cdf =
        boost::math::cdf(chi2, stats[static_cast<std::size_t>(i)]);
    const double ecdf_hi = static_cast<double>(i + 1) / reps;
    const double ecdf_lo = static_cast<double>(i) / reps;
    ks = std::max(ks, std::max(std::abs(cdf - ecdf_hi),
                               std::abs(cdf - ecdf_lo)));
  }
  // 1% critical value: 1.63 / sqrt(reps)
  CHECK(ks <= 1.63 / std::sqrt(static_cast<double>(reps)));
}

TEST_CASE("fit counter increments per fit", "[estimation]") {
  const Dataset ds = synthetic_dataset(53);
  const std::uint64_t before = fit_counter().load();
  fit_mle(ds, ModelSpec{});
  ModelSpec spec;
  spec.mean_terms = {"a"};
  fit_mle(ds, spec);
  CHECK(fit_counter().load() - before == 2);
}

TEST_CASE("dimension guard: k must stay below n", "[estimation]") {
  Eigen::VectorXd y(3);
  y << 0.2, 0.5, 0.7;
  Eigen::VectorXd a(3);
  a << 0.1, 0.9, 0.4;
  const Dataset tiny(y, {"a"}, {a});
  ModelSpec too_big;
  too_big.mean_terms = {"a"};
  too_big.disp_terms = {"a"};  // k = 4 >= n = 3
  CHECK_THROWS_AS(fit_mle(tiny, too_big), std::invalid_argument);
}
