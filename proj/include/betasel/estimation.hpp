#ifndef BETASEL_ESTIMATION_HPP
#define BETASEL_ESTIMATION_HPP

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "betasel/data.hpp"
#include "betasel/links.hpp"

namespace betasel {

struct FitOptions {
  int max_iter = 500;
  double grad_tol = 1e-8;         // max-norm of the score
  double loglik_rel_tol = 1e-12;  // relative log-likelihood change
  bool compute_std_errors = true;
};

/// Maximum-likelihood output for one model specification.
struct FitResult {
  ModelSpec spec;
  Eigen::VectorXd beta_hat;    // length r
  Eigen::VectorXd gamma_hat;   // length s
  double loglik = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd mu_hat, sigma_hat;  // fitted values, inside (0,1)
  Eigen::VectorXd eta_hat, nu_hat;    // linear predictors
  Eigen::VectorXd std_errors;  // length k, or empty if information singular
  bool converged = false;
  int iterations = 0;
  double grad_norm = std::numeric_limits<double>::infinity();
  Eigen::Index n = 0;

  int r() const { return static_cast<int>(beta_hat.size()); }
  int s() const { return static_cast<int>(gamma_hat.size()); }
  int k() const { return r() + s(); }

  Eigen::VectorXd theta() const {
    Eigen::VectorXd th(k());
    th << beta_hat, gamma_hat;
    return th;
  }
};

struct ScoreTestResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

/// Process-wide count of maximum-likelihood fits, for cost accounting in
/// search schemes and their tests.
inline std::atomic<std::uint64_t>& fit_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

namespace detail {

inline constexpr double kFitClamp = 1e-12;

inline double clamp_fit(double v) {
  if (v < kFitClamp) return kFitClamp;
  if (v > 1.0 - kFitClamp) return 1.0 - kFitClamp;
  return v;
}

/// Log-likelihood machinery for one (y, X, Z, links) problem. Parameters
/// are stacked as theta = (beta, gamma).
class BetaRegProblem {
 public:
  BetaRegProblem(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                 const Eigen::MatrixXd& Z, Link mean_link, Link disp_link)
      : y_(y),
        X_(X),
        Z_(Z),
        mean_link_(mean_link),
        disp_link_(disp_link),
        log_y_(y.array().log()),
        log1m_y_((-y.array()).log1p()) {}

  Eigen::Index n() const { return y_.size(); }
  int r() const { return static_cast<int>(X_.cols()); }
  int s() const { return static_cast<int>(Z_.cols()); }
  int dim() const { return r() + s(); }

  void fitted(const Eigen::VectorXd& theta, Eigen::VectorXd& mu,
              Eigen::VectorXd& sigma, Eigen::VectorXd& eta,
              Eigen::VectorXd& nu) const {
    eta = X_ * theta.head(r());
    nu = Z_ * theta.tail(s());
    mu.resize(n());
    sigma.resize(n());
    for (Eigen::Index t = 0; t < n(); ++t) {
      if (!std::isfinite(eta[t]) || !std::isfinite(nu[t])) {
        mu[t] = std::numeric_limits<double>::quiet_NaN();
        sigma[t] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      mu[t] = clamp_fit(link_inverse(mean_link_, eta[t]));
      sigma[t] = clamp_fit(link_inverse(disp_link_, nu[t]));
    }
  }

  /// Sum over observations of the log-density. Returns -infinity when the
  /// evaluation is not finite, which the optimizer treats as a rejected
  /// trial point.
  double loglik(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd mu, sigma, eta, nu;
    fitted(theta, mu, sigma, eta, nu);
    double ll = 0.0;
    for (Eigen::Index t = 0; t < n(); ++t) {
      if (!std::isfinite(mu[t]) || !std::isfinite(sigma[t])) {
        return -std::numeric_limits<double>::infinity();
      }
      const double phi = (1.0 - sigma[t] * sigma[t]) / (sigma[t] * sigma[t]);
      const double p = mu[t] * phi;
      const double q = (1.0 - mu[t]) * phi;
      ll += std::lgamma(phi) - std::lgamma(p) - std::lgamma(q) +
            (p - 1.0) * log_y_[t] + (q - 1.0) * log1m_y_[t];
    }
    return std::isfinite(ll) ? ll
                             : -std::numeric_limits<double>::infinity();
  }

  /// Analytic gradient of the log-likelihood in (beta, gamma). Uses the
  /// chain rule through both links; digamma handles the log-gamma terms.
  Eigen::VectorXd score(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd mu, sigma, eta, nu;
    fitted(theta, mu, sigma, eta, nu);
    Eigen::VectorXd wb(n()), wg(n());
    for (Eigen::Index t = 0; t < n(); ++t) {
      const double m = mu[t];
      const double sg = sigma[t];
      const double phi = (1.0 - sg * sg) / (sg * sg);
      const double p = m * phi;
      const double q = (1.0 - m) * phi;
      const double ystar = log_y_[t] - log1m_y_[t];
      const double mustar =
          boost::math::digamma(p) - boost::math::digamma(q);
      const double dl_dmu = phi * (ystar - mustar);
      const double dl_dphi = boost::math::digamma(phi) -
                             m * boost::math::digamma(p) -
                             (1.0 - m) * boost::math::digamma(q) +
                             m * log_y_[t] + (1.0 - m) * log1m_y_[t];
      wb[t] = dl_dmu / link_deriv(mean_link_, m);
      // dphi/dnu = (dphi/dsigma) / h'(sigma), with dphi/dsigma = -2/sigma^3
      wg[t] = dl_dphi * (-2.0 / (sg * sg * sg)) / link_deriv(disp_link_, sg);
    }
    Eigen::VectorXd g(dim());
    g.head(r()) = X_.transpose() * wb;
    g.tail(s()) = Z_.transpose() * wg;
    return g;
  }

  /// Expected (Fisher) information of theta, from the closed-form second
  /// moments of the beta log-density; link curvature terms vanish in
  /// expectation because the score has mean zero.
  Eigen::MatrixXd fisher_information(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd mu, sigma, eta, nu;
    fitted(theta, mu, sigma, eta, nu);
    Eigen::VectorXd wbb(n()), wbg(n()), wgg(n());
    for (Eigen::Index t = 0; t < n(); ++t) {
      const double m = mu[t];
      const double sg = sigma[t];
      const double phi = (1.0 - sg * sg) / (sg * sg);
      const double p = m * phi;
      const double q = (1.0 - m) * phi;
      const double t1p = boost::math::trigamma(p);
      const double t1q = boost::math::trigamma(q);
      const double t1f = boost::math::trigamma(phi);
      const double dmu = 1.0 / link_deriv(mean_link_, m);
      const double dphi =
          (-2.0 / (sg * sg * sg)) / link_deriv(disp_link_, sg);
      wbb[t] = phi * phi * (t1p + t1q) * dmu * dmu;
      wbg[t] = phi * (t1p * m - t1q * (1.0 - m)) * dmu * dphi;
      wgg[t] = (m * m * t1p + (1.0 - m) * (1.0 - m) * t1q - t1f) * dphi * dphi;
    }
    Eigen::MatrixXd K(dim(), dim());
    K.topLeftCorner(r(), r()) = X_.transpose() * wbb.asDiagonal() * X_;
    K.topRightCorner(r(), s()) = X_.transpose() * wbg.asDiagonal() * Z_;
    K.bottomLeftCorner(s(), r()) = K.topRightCorner(r(), s()).transpose();
    K.bottomRightCorner(s(), s()) = Z_.transpose() * wgg.asDiagonal() * Z_;
    return K;
  }

  /// Observed information: central finite differences of the analytic
  /// score, step 1e-5 scaled by parameter magnitude.
  Eigen::MatrixXd observed_information(const Eigen::VectorXd& theta) const {
    const int k = dim();
    Eigen::MatrixXd H(k, k);
    for (int i = 0; i < k; ++i) {
      const double h = 1e-5 * std::max(1.0, std::abs(theta[i]));
      Eigen::VectorXd tp = theta, tm = theta;
      tp[i] += h;
      tm[i] -= h;
      H.col(i) = -(score(tp) - score(tm)) / (2.0 * h);
    }
    return 0.5 * (H + H.transpose());
  }

 private:
  const Eigen::VectorXd& y_;
  const Eigen::MatrixXd& X_;
  const Eigen::MatrixXd& Z_;
  Link mean_link_, disp_link_;
  Eigen::ArrayXd log_y_, log1m_y_;
};

struct BfgsOutcome {
  Eigen::VectorXd theta;
  double value = -std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
  double grad_norm = std::numeric_limits<double>::infinity();
};

/// Quasi-Newton maximization with backtracking line search satisfying the
/// Armijo sufficient-decrease condition. Non-finite trial values are
/// treated as line-search failures.
inline BfgsOutcome maximize_bfgs(const BetaRegProblem& prob,
                                 const Eigen::VectorXd& theta0,
                                 const FitOptions& opts) {
  const int k = prob.dim();
  const double c1 = 1e-4;
  BfgsOutcome out;

  Eigen::VectorXd x = theta0;
  double fx = -prob.loglik(x);
  if (!std::isfinite(fx)) {
    // fall back to a bland but always-evaluable starting point
    x.setZero();
    fx = -prob.loglik(x);
  }
  Eigen::VectorXd g = -prob.score(x);
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(k, k);
  bool identity_h = true;

  for (int it = 0; it < opts.max_iter; ++it) {
    out.iterations = it;
    out.grad_norm = g.lpNorm<Eigen::Infinity>();
    if (out.grad_norm <= opts.grad_tol) {
      out.converged = true;
      break;
    }

    Eigen::VectorXd p = -(Hinv * g);
    double gtp = g.dot(p);
    if (!(gtp < 0.0)) {
      Hinv.setIdentity();
      identity_h = true;
      p = -g;
      gtp = g.dot(p);
    }

    double alpha = 1.0;
    double fn = fx;
    Eigen::VectorXd xn;
    bool accepted = false;
    for (int ls = 0; ls < 80; ++ls) {
      xn = x + alpha * p;
      fn = -prob.loglik(xn);
      if (std::isfinite(fn) && fn <= fx + c1 * alpha * gtp) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (!identity_h) {
        Hinv.setIdentity();
        identity_h = true;
        continue;  // retry along steepest ascent
      }
      break;  // genuine stall
    }

    Eigen::VectorXd gn = -prob.score(xn);
    const Eigen::VectorXd step = xn - x;
    const Eigen::VectorXd dg = gn - g;
    const double sy = step.dot(dg);
    const double rel_change =
        std::abs(fn - fx) / (std::abs(fx) + 1e-300);

    x = xn;
    fx = fn;
    g = gn;

    if (sy > 1e-12 * step.norm() * dg.norm()) {
      const Eigen::VectorXd Hy = Hinv * dg;
      const double yHy = dg.dot(Hy);
      Hinv += ((sy + yHy) / (sy * sy)) * (step * step.transpose());
      const Eigen::MatrixXd cross = Hy * step.transpose();
      Hinv -= (cross + cross.transpose()) / sy;
      identity_h = false;
    }

    if (rel_change <= opts.loglik_rel_tol) {
      out.iterations = it + 1;
      out.grad_norm = g.lpNorm<Eigen::Infinity>();
      out.converged = true;
      break;
    }
  }
  out.theta = x;
  out.value = -fx;
  if (!out.converged) out.grad_norm = g.lpNorm<Eigen::Infinity>();
  return out;
}

/// OLS of g(y) on X for the mean start, then a method-of-moments
/// dispersion estimate from the OLS residual variance.
inline Eigen::VectorXd starting_values(const BetaRegProblem& prob,
                                       const Eigen::VectorXd& y,
                                       const Eigen::MatrixXd& X,
                                       const Eigen::MatrixXd& Z,
                                       Link mean_link, Link disp_link) {
  const Eigen::Index n = y.size();
  Eigen::VectorXd gy(n);
  for (Eigen::Index t = 0; t < n; ++t) gy[t] = link_eval(mean_link, y[t]);
  const Eigen::VectorXd beta0 = X.colPivHouseholderQr().solve(gy);
  const Eigen::VectorXd resid = gy - X * beta0;
  const double dof = std::max<double>(1.0, static_cast<double>(n - X.cols()));
  const double s2 = resid.squaredNorm() / dof;

  double sig2_acc = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double mu0 = clamp_fit(link_inverse(mean_link, X.row(t) * beta0));
    const double dmu = 1.0 / link_deriv(mean_link, mu0);
    const double var_y = s2 * dmu * dmu;  // delta method on g(y)
    double sig2 = var_y / (mu0 * (1.0 - mu0));
    sig2 = std::min(std::max(sig2, 1e-4), 1.0 - 1e-4);
    sig2_acc += sig2;
  }
  double sig_tilde = std::sqrt(sig2_acc / static_cast<double>(n));
  sig_tilde = std::min(std::max(sig_tilde, 0.01), 0.99);

  Eigen::VectorXd theta0(prob.dim());
  theta0.head(X.cols()) = beta0;
  theta0.tail(Z.cols()).setZero();
  theta0[X.cols()] = link_eval(disp_link, sig_tilde);
  return theta0;
}

}  // namespace detail

/// ell(beta, gamma) for an explicit coefficient pair.
inline double loglik(const Dataset& ds, const ModelSpec& spec,
                     const Eigen::VectorXd& beta,
                     const Eigen::VectorXd& gamma) {
  const DesignPair d = build_design(ds, spec);
  detail::BetaRegProblem prob(ds.y(), d.X, d.Z, spec.mean_link,
                              spec.disp_link);
  Eigen::VectorXd theta(prob.dim());
  theta << beta, gamma;
  const double ll = prob.loglik(theta);
  if (!std::isfinite(ll)) {
    throw std::runtime_error("loglik: evaluation is not finite");
  }
  return ll;
}

/// Analytic score vector, stacked as (beta, gamma).
inline Eigen::VectorXd score(const Dataset& ds, const ModelSpec& spec,
                             const Eigen::VectorXd& beta,
                             const Eigen::VectorXd& gamma) {
  const DesignPair d = build_design(ds, spec);
  detail::BetaRegProblem prob(ds.y(), d.X, d.Z, spec.mean_link,
                              spec.disp_link);
  Eigen::VectorXd theta(prob.dim());
  theta << beta, gamma;
  return prob.score(theta);
}

namespace detail {

inline FitResult fit_mle_impl(const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& X,
                              const Eigen::MatrixXd& Z, const ModelSpec& spec,
                              const FitOptions& opts) {
  fit_counter().fetch_add(1, std::memory_order_relaxed);
  if (X.cols() + Z.cols() >= y.size()) {
    throw std::invalid_argument(
        "fit_mle: model dimension k = " +
        std::to_string(X.cols() + Z.cols()) +
        " must be smaller than the number of observations n = " +
        std::to_string(y.size()));
  }
  BetaRegProblem prob(y, X, Z, spec.mean_link, spec.disp_link);
  const Eigen::VectorXd theta0 =
      starting_values(prob, y, X, Z, spec.mean_link, spec.disp_link);
  const BfgsOutcome opt = maximize_bfgs(prob, theta0, opts);

  FitResult fit;
  fit.spec = spec;
  fit.n = y.size();
  fit.beta_hat = opt.theta.head(X.cols());
  fit.gamma_hat = opt.theta.tail(Z.cols());
  fit.loglik = opt.value;
  fit.converged = opt.converged;
  fit.iterations = opt.iterations;
  fit.grad_norm = opt.grad_norm;
  prob.fitted(opt.theta, fit.mu_hat, fit.sigma_hat, fit.eta_hat, fit.nu_hat);

  if (opts.compute_std_errors && opt.converged) {
    const Eigen::MatrixXd H = prob.observed_information(opt.theta);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      const Eigen::MatrixXd cov =
          ldlt.solve(Eigen::MatrixXd::Identity(prob.dim(), prob.dim()));
      Eigen::VectorXd se(prob.dim());
      bool ok = true;
      for (int i = 0; i < prob.dim(); ++i) {
        if (cov(i, i) > 0.0 && std::isfinite(cov(i, i))) {
          se[i] = std::sqrt(cov(i, i));
        } else {
          ok = false;
          break;
        }
      }
      if (ok) fit.std_errors = se;
    }
    // singular information: standard errors stay absent, the likelihood
    // based criteria can still use the fit
  }
  return fit;
}

}  // namespace detail

/// Maximum-likelihood fit of a model specification on a dataset.
/// Non-convergence is reported through FitResult::converged, not thrown.
inline FitResult fit_mle(const Dataset& ds, const ModelSpec& spec,
                         const FitOptions& opts = {}) {
  const DesignPair d = build_design(ds, spec);
  return detail::fit_mle_impl(ds.y(), d.X, d.Z, spec, opts);
}

enum class RefDist { normal, student_t };

struct WaldRow {
  std::string name;
  double estimate;
  double std_error;
  double z;
  double p;
};

/// Coefficient table with z statistics and two-sided p-values. The
/// reference distribution is standard normal by default; Student t with
/// n - k degrees of freedom is available as a compatibility switch.
inline std::vector<WaldRow> wald_table(const FitResult& fit,
                                       RefDist ref = RefDist::normal) {
  if (fit.std_errors.size() != fit.k()) {
    throw std::runtime_error(
        "wald_table: standard errors are unavailable for this fit");
  }
  const Eigen::VectorXd th = fit.theta();
  std::vector<std::string> names;
  names.push_back("(mean) intercept");
  for (const auto& t : fit.spec.mean_terms) names.push_back("(mean) " + t);
  names.push_back("(disp) intercept");
  for (const auto& t : fit.spec.disp_terms) names.push_back("(disp) " + t);

  std::vector<WaldRow> rows;
  for (int i = 0; i < fit.k(); ++i) {
    WaldRow row;
    row.name = names[static_cast<std::size_t>(i)];
    row.estimate = th[i];
    row.std_error = fit.std_errors[i];
    row.z = row.std_error > 0.0 ? row.estimate / row.std_error : 0.0;
    const double az = std::abs(row.z);
    if (ref == RefDist::normal) {
      row.p = std::erfc(az / std::sqrt(2.0));
    } else {
      const double dof = static_cast<double>(fit.n - fit.k());
      boost::math::students_t_distribution<double> tdist(dof);
      row.p = 2.0 * boost::math::cdf(tdist, -az);
    }
    rows.push_back(row);
  }
  return rows;
}

/// Score (Lagrange multiplier) test of constant dispersion: gamma_2 = ... =
/// gamma_s = 0 in the dispersion submodel of `spec`. Fits the restricted
/// model (dispersion intercept only), evaluates the full-model score there,
/// and uses the expected (Fisher) information for the quadratic form. The
/// statistic is asymptotically chi-squared with s - 1 degrees of freedom.
inline ScoreTestResult score_test_constant_dispersion(
    const Dataset& ds, const ModelSpec& spec, const FitOptions& opts = {}) {
  const int s = spec.s();
  if (s < 2) {
    throw std::invalid_argument(
        "score test: the dispersion submodel has no candidate terms, "
        "nothing to test");
  }
  const DesignPair d = build_design(ds, spec);

  ModelSpec restricted = spec;
  restricted.disp_terms.clear();
  const FitResult rfit = fit_mle(ds, restricted, opts);
  if (!rfit.converged) {
    throw std::runtime_error("score test: restricted fit did not converge");
  }

  detail::BetaRegProblem prob(ds.y(), d.X, d.Z, spec.mean_link,
                              spec.disp_link);
  Eigen::VectorXd theta(prob.dim());
  theta.setZero();
  theta.head(spec.r()) = rfit.beta_hat;
  theta[spec.r()] = rfit.gamma_hat[0];

  const Eigen::VectorXd U = prob.score(theta);
  const Eigen::MatrixXd K = prob.fisher_information(theta);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  if (!lu.isInvertible()) {
    throw std::runtime_error(
        "score test: information matrix is singular at the restricted "
        "estimate");
  }
  const Eigen::MatrixXd Kinv = lu.inverse();
  const int m = s - 1;
  const Eigen::VectorXd Ug = U.tail(m);
  const Eigen::MatrixXd block = Kinv.bottomRightCorner(m, m);

  ScoreTestResult res;
  res.statistic = Ug.dot(block * Ug);
  res.df = m;
  boost::math::chi_squared_distribution<double> chi2(
      static_cast<double>(m));
  res.p_value = boost::math::cdf(boost::math::complement(chi2,
                                                         res.statistic));
  return res;
}

}  // namespace betasel

#endif  // BETASEL_ESTIMATION_HPP
