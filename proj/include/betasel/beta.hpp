#ifndef BETASEL_BETA_HPP
#define BETASEL_BETA_HPP

#include <cmath>
#include <random>
#include <stdexcept>

namespace betasel {

/// Beta law under the mean/dispersion parametrization: mu is the mean and
/// sigma the dispersion, both strictly inside (0,1). The precision is
/// phi = (1 - sigma^2) / sigma^2, equivalently sigma^2 = 1/(1 + phi), and
/// the classical shape parameters are (mu * phi, (1 - mu) * phi).
struct BetaParams {
  double mu;
  double sigma;

  BetaParams(double mu_, double sigma_) : mu(mu_), sigma(sigma_) {
    if (!(mu > 0.0 && mu < 1.0) || !std::isfinite(mu)) {
      throw std::domain_error("BetaParams: mu must lie strictly inside (0,1)");
    }
    if (!(sigma > 0.0 && sigma < 1.0) || !std::isfinite(sigma)) {
      throw std::domain_error(
          "BetaParams: sigma must lie strictly inside (0,1)");
    }
  }

  double phi() const { return (1.0 - sigma * sigma) / (sigma * sigma); }
  double shape1() const { return mu * phi(); }
  double shape2() const { return (1.0 - mu) * phi(); }
};

inline double phi_from_sigma(double sigma) {
  if (!(sigma > 0.0 && sigma < 1.0) || !std::isfinite(sigma)) {
    throw std::domain_error("phi_from_sigma: sigma must be in (0,1)");
  }
  return (1.0 - sigma * sigma) / (sigma * sigma);
}

inline double sigma_from_phi(double phi) {
  if (!(phi > 0.0) || !std::isfinite(phi)) {
    throw std::domain_error("sigma_from_phi: phi must be positive and finite");
  }
  return std::sqrt(1.0 / (1.0 + phi));
}

/// var(y) = mu (1 - mu) sigma^2.
inline double variance(const BetaParams& p) {
  return p.mu * (1.0 - p.mu) * p.sigma * p.sigma;
}

/// log f(y; mu, sigma), evaluated entirely in log space so that large
/// precisions (phi up to 1e8 and beyond) do not overflow.
inline double log_density(double y, const BetaParams& p) {
  if (!(y > 0.0 && y < 1.0)) {
    throw std::domain_error("log_density: y must lie strictly inside (0,1)");
  }
  const double phi = p.phi();
  const double a = p.mu * phi;
  const double b = (1.0 - p.mu) * phi;
  return std::lgamma(phi) - std::lgamma(a) - std::lgamma(b) +
         (a - 1.0) * std::log(y) + (b - 1.0) * std::log1p(-y);
}

inline double density(double y, const BetaParams& p) {
  return std::exp(log_density(y, p));
}

/// One beta draw via the ratio of two gamma deviates. The caller owns the
/// generator, so streams are reproducible and one generator per worker is
/// safe. The result is resampled in the (measure-zero) event that floating
/// point rounding lands on a boundary.
template <class URBG>
double sample(const BetaParams& p, URBG& gen) {
  std::gamma_distribution<double> ga(p.shape1(), 1.0);
  std::gamma_distribution<double> gb(p.shape2(), 1.0);
  for (;;) {
    const double g1 = ga(gen);
    const double g2 = gb(gen);
    const double y = g1 / (g1 + g2);
    if (y > 0.0 && y < 1.0) return y;
  }
}

}  // namespace betasel

#endif  // BETASEL_BETA_HPP
