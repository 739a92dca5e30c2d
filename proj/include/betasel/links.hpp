#ifndef BETASEL_LINKS_HPP
#define BETASEL_LINKS_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include <boost/math/distributions/normal.hpp>

namespace betasel {

/// Strictly increasing, twice differentiable maps from (0,1) onto the real
/// line, used for both the mean and the dispersion submodel. The log-log
/// link is implemented in its increasing orientation, -log(-log(mu)).
enum class Link { logit, probit, loglog, cloglog, cauchy };

/// Inverse links clamp their result into [eps, 1-eps] so that downstream
/// log-gamma arguments stay finite during line searches.
inline constexpr double kInverseLinkEps = 1e-12;

inline Link link_from_name(std::string_view name) {
  if (name == "logit") return Link::logit;
  if (name == "probit") return Link::probit;
  if (name == "loglog") return Link::loglog;
  if (name == "cloglog") return Link::cloglog;
  if (name == "cauchy") return Link::cauchy;
  throw std::invalid_argument("unknown link function: " + std::string(name));
}

inline std::string_view link_name(Link link) {
  switch (link) {
    case Link::logit: return "logit";
    case Link::probit: return "probit";
    case Link::loglog: return "loglog";
    case Link::cloglog: return "cloglog";
    case Link::cauchy: return "cauchy";
  }
  return "?";
}

namespace detail {

inline void require_open_unit(double mu, const char* what) {
  if (!(mu > 0.0 && mu < 1.0)) {
    throw std::domain_error(std::string(what) +
                            ": argument must lie strictly inside (0,1)");
  }
}

inline double clamp_unit(double p) {
  if (p < kInverseLinkEps) return kInverseLinkEps;
  if (p > 1.0 - kInverseLinkEps) return 1.0 - kInverseLinkEps;
  return p;
}

}  // namespace detail

/// g(mu); throws std::domain_error on boundary input.
inline double link_eval(Link link, double mu) {
  detail::require_open_unit(mu, "link_eval");
  switch (link) {
    case Link::logit:
      return std::log(mu) - std::log1p(-mu);
    case Link::probit: {
      static const boost::math::normal_distribution<double> norm;
      return boost::math::quantile(norm, mu);
    }
    case Link::loglog:
      return -std::log(-std::log(mu));
    case Link::cloglog:
      return std::log(-std::log1p(-mu));
    case Link::cauchy:
      return std::tan(M_PI * (mu - 0.5));
  }
  return std::numeric_limits<double>::quiet_NaN();
}

/// g^{-1}(eta), clamped into [eps, 1-eps]; throws on non-finite eta.
inline double link_inverse(Link link, double eta) {
  if (!std::isfinite(eta)) {
    throw std::domain_error("link_inverse: eta must be finite");
  }
  double p;
  switch (link) {
    case Link::logit:
      // exp-form chosen per sign to avoid overflow
      p = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                     : std::exp(eta) / (1.0 + std::exp(eta));
      break;
    case Link::probit: {
      static const boost::math::normal_distribution<double> norm;
      p = boost::math::cdf(norm, eta);
      break;
    }
    case Link::loglog:
      p = std::exp(-std::exp(-eta));
      break;
    case Link::cloglog:
      p = -std::expm1(-std::exp(eta));
      break;
    case Link::cauchy:
      p = 0.5 + std::atan(eta) / M_PI;
      break;
    default:
      p = std::numeric_limits<double>::quiet_NaN();
  }
  return detail::clamp_unit(p);
}

/// dg/dmu, strictly positive on (0,1); throws on boundary input.
inline double link_deriv(Link link, double mu) {
  detail::require_open_unit(mu, "link_deriv");
  switch (link) {
    case Link::logit:
      return 1.0 / (mu * (1.0 - mu));
    case Link::probit: {
      static const boost::math::normal_distribution<double> norm;
      return 1.0 / boost::math::pdf(norm, boost::math::quantile(norm, mu));
    }
    case Link::loglog:
      return -1.0 / (mu * std::log(mu));
    case Link::cloglog:
      return -1.0 / ((1.0 - mu) * std::log1p(-mu));
    case Link::cauchy: {
      const double t = std::tan(M_PI * (mu - 0.5));
      return M_PI * (1.0 + t * t);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace betasel

#endif  // BETASEL_LINKS_HPP
