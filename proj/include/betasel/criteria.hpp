#ifndef BETASEL_CRITERIA_HPP
#define BETASEL_CRITERIA_HPP

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "betasel/data.hpp"
#include "betasel/estimation.hpp"

namespace betasel {

enum class CriterionKind {
  AIC,
  AICc,
  SIC,
  SICc,
  HQ,
  HQc,
  R2FC_adj,
  R2LR_adj,
  R2HS_adj,
  R2D,
  R2LRW,
};

enum class Direction { minimize, maximize };

/// Sample-size dependent penalty scale: 1, log(n) or sqrt(n).
enum class SampleScale { one, log_n, sqrt_n };

inline double resolve_scale(SampleScale s, Eigen::Index n) {
  switch (s) {
    case SampleScale::one: return 1.0;
    case SampleScale::log_n: return std::log(static_cast<double>(n));
    case SampleScale::sqrt_n: return std::sqrt(static_cast<double>(n));
  }
  return 1.0;
}

/// A criterion identity plus its tuning constants and optimization
/// direction. `label` carries the preset name when one was used.
struct CriterionConfig {
  CriterionKind kind = CriterionKind::AIC;
  double alpha = 0.0;                        // R2D, R2LRW
  double delta = 1.0;                        // R2LRW
  SampleScale lambda_n = SampleScale::log_n; // R2HS_adj, R2D
  SampleScale delta_n = SampleScale::log_n;  // R2D
  std::string label;

  Direction direction() const {
    switch (kind) {
      case CriterionKind::AIC:
      case CriterionKind::AICc:
      case CriterionKind::SIC:
      case CriterionKind::SICc:
      case CriterionKind::HQ:
      case CriterionKind::HQc:
        return Direction::minimize;
      default:
        return Direction::maximize;
    }
  }

  /// True when evaluation needs the intercepts-only log-likelihood.
  bool needs_null_fit() const {
    return kind == CriterionKind::R2LR_adj || kind == CriterionKind::R2LRW;
  }
};

/// value `a` is better than `b` in the criterion's direction
inline bool criterion_better(const CriterionConfig& c, double a, double b) {
  return c.direction() == Direction::minimize ? a < b : a > b;
}

// ---------------------------------------------------------------------------
// penalized likelihood family
// ---------------------------------------------------------------------------

/// AIC, AICc, SIC, SICc, HQ and HQc from the maximized log-likelihood.
inline double aic_family(double loglik, Eigen::Index n, int k,
                         CriterionKind kind) {
  const double nn = static_cast<double>(n);
  const double kk = static_cast<double>(k);
  const double base = -2.0 * loglik;
  switch (kind) {
    case CriterionKind::AIC:
      return base + 2.0 * kk;
    case CriterionKind::AICc:
      if (n <= k + 1) {
        throw std::domain_error("AICc requires n > k + 1");
      }
      return base + 2.0 * nn * kk / (nn - kk - 1.0);
    case CriterionKind::SIC:
      return base + kk * std::log(nn);
    case CriterionKind::SICc:
      if (n <= k + 1) {
        throw std::domain_error("SICc requires n > k + 1");
      }
      return base + nn * kk * std::log(nn) / (nn - kk - 1.0);
    case CriterionKind::HQ:
      if (n < 3) throw std::domain_error("HQ requires n >= 3");
      return base + 2.0 * kk * std::log(std::log(nn));
    case CriterionKind::HQc:
      if (n < 3) throw std::domain_error("HQc requires n >= 3");
      if (n <= k + 1) {
        throw std::domain_error("HQc requires n > k + 1");
      }
      return base + 2.0 * nn * kk * std::log(std::log(nn)) / (nn - kk - 1.0);
    default:
      throw std::invalid_argument("aic_family: not a likelihood criterion");
  }
}

// ---------------------------------------------------------------------------
// pseudo-R2 family
// ---------------------------------------------------------------------------

/// Squared sample correlation between g(y) and the fitted mean linear
/// predictor. Defined as 0 when either side has zero variance (e.g. an
/// intercept-only mean submodel).
inline double r2_fc(const Dataset& ds, const FitResult& fit) {
  const Eigen::Index n = ds.n();
  Eigen::VectorXd gy(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    gy[t] = link_eval(fit.spec.mean_link, ds.y()[t]);
  }
  const Eigen::VectorXd a = gy.array() - gy.mean();
  const Eigen::VectorXd b = fit.eta_hat.array() - fit.eta_hat.mean();
  const double va = a.squaredNorm();
  const double vb = b.squaredNorm();
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  const double c = a.dot(b);
  return (c * c) / (va * vb);
}

inline double r2_fc_adj(const Dataset& ds, const FitResult& fit) {
  const double nn = static_cast<double>(ds.n());
  const double kk = static_cast<double>(fit.k());
  return 1.0 - (1.0 - r2_fc(ds, fit)) * (nn - 1.0) / (nn - kk);
}

/// Likelihood-ratio pseudo-R2 against the both-intercepts-only fit,
/// computed in log space.
inline double r2_lr(const FitResult& fit, double loglik_null) {
  return 1.0 - std::exp(2.0 * (loglik_null - fit.loglik) /
                        static_cast<double>(fit.n));
}

inline double r2_lr_adj(const FitResult& fit, double loglik_null) {
  const double nn = static_cast<double>(fit.n);
  const double kk = static_cast<double>(fit.k());
  return 1.0 - (1.0 - r2_lr(fit, loglik_null)) * ((nn - 1.0) / (nn - kk));
}

/// Weighted likelihood-ratio criterion
/// 1 - (1 - R2_LR) [(n-1) / (n - (1+alpha) r - (1-alpha) s)]^delta.
/// With alpha = 0 and delta = 1 this reproduces r2_lr_adj exactly.
inline double r2_lrw(const FitResult& fit, double loglik_null, double alpha,
                     double delta) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::domain_error("r2_lrw: alpha must lie in [0,1]");
  }
  if (!(delta > 0.0)) throw std::domain_error("r2_lrw: delta must be > 0");
  const double nn = static_cast<double>(fit.n);
  const double denom = nn - (1.0 + alpha) * static_cast<double>(fit.r()) -
                       (1.0 - alpha) * static_cast<double>(fit.s());
  if (!(denom > 0.0)) {
    throw std::domain_error(
        "r2_lrw: penalty denominator n - (1+alpha) r - (1-alpha) s is not "
        "positive");
  }
  return 1.0 - (1.0 - r2_lr(fit, loglik_null)) *
                   std::pow((nn - 1.0) / denom, delta);
}

namespace detail {

// 1 - (n-1)/(n - count) * ss_res/ss_tot, shared by the HS-style terms
inline double penalized_gof(double nn, double count, double ss_res,
                            double ss_tot, const char* what) {
  if (!(nn > count)) {
    throw std::domain_error(std::string(what) +
                            ": penalty requires n > scaled parameter count");
  }
  if (!(ss_tot > 0.0)) {
    throw std::domain_error(std::string(what) +
                            ": total sum of squares is degenerate");
  }
  return 1.0 - ((nn - 1.0) / (nn - count)) * (ss_res / ss_tot);
}

}  // namespace detail

/// HS-style goodness-of-fit criterion with penalty scale lambda_n applied
/// to the full parameter count k.
inline double r2_hs_adj(const Dataset& ds, const FitResult& fit,
                        SampleScale lambda_n) {
  const double nn = static_cast<double>(ds.n());
  const Eigen::VectorXd resid = ds.y() - fit.mu_hat;
  const Eigen::VectorXd cent = ds.y().array() - ds.y().mean();
  return detail::penalized_gof(
      nn, resolve_scale(lambda_n, ds.n()) * static_cast<double>(fit.k()),
      resid.squaredNorm(), cent.squaredNorm(), "r2_hs_adj");
}

/// Pointwise dispersion proxy |y_t - mu_t| / sqrt(mu_t (1 - mu_t)).
inline Eigen::VectorXd sigma_star(const Dataset& ds, const FitResult& fit) {
  Eigen::VectorXd out(ds.n());
  for (Eigen::Index t = 0; t < ds.n(); ++t) {
    const double m = fit.mu_hat[t];
    out[t] = std::abs(ds.y()[t] - m) / std::sqrt(m * (1.0 - m));
  }
  return out;
}

/// Convex combination of mean-fit and dispersion-fit measures, each
/// penalized by its own submodel dimension (r and s respectively).
inline double r2_d(const Dataset& ds, const FitResult& fit, double alpha,
                   SampleScale lambda_n, SampleScale delta_n) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::domain_error("r2_d: alpha must lie in [0,1]");
  }
  const double nn = static_cast<double>(ds.n());
  double mean_part = 0.0;
  double disp_part = 0.0;
  if (alpha > 0.0) {
    const Eigen::VectorXd resid = ds.y() - fit.mu_hat;
    const Eigen::VectorXd cent = ds.y().array() - ds.y().mean();
    mean_part = detail::penalized_gof(
        nn, resolve_scale(lambda_n, ds.n()) * static_cast<double>(fit.r()),
        resid.squaredNorm(), cent.squaredNorm(), "r2_d (mean part)");
    if (alpha == 1.0) return mean_part;
  }
  const Eigen::VectorXd ss = sigma_star(ds, fit);
  const Eigen::VectorXd sresid = ss - fit.sigma_hat;
  const Eigen::VectorXd scent = ss.array() - ss.mean();
  disp_part = detail::penalized_gof(
      nn, resolve_scale(delta_n, ds.n()) * static_cast<double>(fit.s()),
      sresid.squaredNorm(), scent.squaredNorm(), "r2_d (dispersion part)");
  if (alpha == 0.0) return disp_part;
  return alpha * mean_part + (1.0 - alpha) * disp_part;
}

// ---------------------------------------------------------------------------
// dispatch, presets, parsing
// ---------------------------------------------------------------------------

/// Evaluate any criterion for a fitted model. `loglik_null` is consulted
/// only by the likelihood-ratio family; pass NaN otherwise.
inline double evaluate_criterion(const CriterionConfig& c, const Dataset& ds,
                                 const FitResult& fit, double loglik_null) {
  switch (c.kind) {
    case CriterionKind::AIC:
    case CriterionKind::AICc:
    case CriterionKind::SIC:
    case CriterionKind::SICc:
    case CriterionKind::HQ:
    case CriterionKind::HQc:
      return aic_family(fit.loglik, fit.n, fit.k(), c.kind);
    case CriterionKind::R2FC_adj:
      return r2_fc_adj(ds, fit);
    case CriterionKind::R2LR_adj:
      return r2_lr_adj(fit, loglik_null);
    case CriterionKind::R2HS_adj:
      return r2_hs_adj(ds, fit, c.lambda_n);
    case CriterionKind::R2D:
      return r2_d(ds, fit, c.alpha, c.lambda_n, c.delta_n);
    case CriterionKind::R2LRW:
      return r2_lrw(fit, loglik_null, c.alpha, c.delta);
  }
  throw std::invalid_argument("evaluate_criterion: unknown kind");
}

/// Named tuning presets for the two varying-dispersion criteria.
inline CriterionConfig criterion_preset(std::string_view name) {
  CriterionConfig c;
  c.label = std::string(name);
  if (name == "D1") {
    c.kind = CriterionKind::R2D;
    c.alpha = 0.4;
    c.lambda_n = SampleScale::log_n;
    c.delta_n = SampleScale::log_n;
  } else if (name == "D2") {
    c.kind = CriterionKind::R2D;
    c.alpha = 0.6;
    c.lambda_n = SampleScale::log_n;
    c.delta_n = SampleScale::log_n;
  } else if (name == "D3") {
    c.kind = CriterionKind::R2D;
    c.alpha = 0.6;
    c.lambda_n = SampleScale::log_n;
    c.delta_n = SampleScale::one;
  } else if (name == "D4") {
    c.kind = CriterionKind::R2D;
    c.alpha = 0.5;
    c.lambda_n = SampleScale::log_n;
    c.delta_n = SampleScale::one;
  } else if (name == "w1") {
    c.kind = CriterionKind::R2LRW;
    c.alpha = 0.0;
    c.delta = 3.0;
  } else if (name == "w2") {
    c.kind = CriterionKind::R2LRW;
    c.alpha = 0.0;
    c.delta = 2.0;
  } else if (name == "w3") {
    c.kind = CriterionKind::R2LRW;
    c.alpha = 0.0;
    c.delta = 1.5;
  } else if (name == "w4") {
    c.kind = CriterionKind::R2LRW;
    c.alpha = 0.4;
    c.delta = 1.0;
  } else if (name == "w5") {
    c.kind = CriterionKind::R2LRW;
    c.alpha = 0.4;
    c.delta = 2.0;
  } else {
    throw std::invalid_argument("unknown criterion preset: " +
                                std::string(name));
  }
  return c;
}

namespace detail {

inline SampleScale parse_scale(std::string_view v) {
  if (v == "1" || v == "one") return SampleScale::one;
  if (v == "log_n" || v == "logn" || v == "log(n)") return SampleScale::log_n;
  if (v == "sqrt_n" || v == "sqrtn" || v == "sqrt(n)") {
    return SampleScale::sqrt_n;
  }
  throw std::invalid_argument("unknown penalty scale '" + std::string(v) +
                              "' (expected one, log_n or sqrt_n)");
}

// parse "key=value,key=value" between parentheses
inline void parse_kv_args(std::string_view args, CriterionConfig& c) {
  std::size_t pos = 0;
  while (pos < args.size()) {
    std::size_t next = args.find(',', pos);
    if (next == std::string_view::npos) next = args.size();
    std::string_view item = args.substr(pos, next - pos);
    const std::size_t eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("criterion argument '" + std::string(item) +
                                  "' is not key=value");
    }
    const std::string_view key = item.substr(0, eq);
    const std::string value(item.substr(eq + 1));
    if (key == "alpha") {
      c.alpha = std::stod(value);
    } else if (key == "delta") {
      if (c.kind == CriterionKind::R2D) {
        c.delta_n = parse_scale(value);
      } else {
        c.delta = std::stod(value);
      }
    } else if (key == "lambda") {
      c.lambda_n = parse_scale(value);
    } else {
      throw std::invalid_argument("unknown criterion argument '" +
                                  std::string(key) + "'");
    }
    pos = next + 1;
  }
}

}  // namespace detail

/// Parse a criterion identifier: "aic", "aicc", "sic", "sicc", "hq", "hqc",
/// "r2fc", "r2lr", "r2hs", preset forms "r2d:D1".."r2d:D4" and
/// "r2lrw:w1".."r2lrw:w5", and explicit-constant forms
/// "r2d(alpha=..,lambda=..,delta=..)" / "r2lrw(alpha=..,delta=..)" /
/// "r2hs(lambda=..)".
inline CriterionConfig parse_criterion(std::string_view name) {
  CriterionConfig c;
  c.label = std::string(name);
  if (name == "aic") {
    c.kind = CriterionKind::AIC;
  } else if (name == "aicc") {
    c.kind = CriterionKind::AICc;
  } else if (name == "sic") {
    c.kind = CriterionKind::SIC;
  } else if (name == "sicc") {
    c.kind = CriterionKind::SICc;
  } else if (name == "hq") {
    c.kind = CriterionKind::HQ;
  } else if (name == "hqc") {
    c.kind = CriterionKind::HQc;
  } else if (name == "r2fc") {
    c.kind = CriterionKind::R2FC_adj;
  } else if (name == "r2lr") {
    c.kind = CriterionKind::R2LR_adj;
  } else if (name == "r2hs") {
    c.kind = CriterionKind::R2HS_adj;  // lambda_n defaults to log(n)
  } else if (name.rfind("r2d:", 0) == 0) {
    c = criterion_preset(name.substr(4));
    c.label = std::string(name);
    if (c.kind != CriterionKind::R2D) {
      throw std::invalid_argument("preset " + std::string(name.substr(4)) +
                                  " is not an r2d preset");
    }
  } else if (name.rfind("r2lrw:", 0) == 0) {
    c = criterion_preset(name.substr(6));
    c.label = std::string(name);
    if (c.kind != CriterionKind::R2LRW) {
      throw std::invalid_argument("preset " + std::string(name.substr(6)) +
                                  " is not an r2lrw preset");
    }
  } else if (name.rfind("r2d(", 0) == 0 && name.back() == ')') {
    c.kind = CriterionKind::R2D;
    c.alpha = 0.5;
    detail::parse_kv_args(name.substr(4, name.size() - 5), c);
  } else if (name.rfind("r2lrw(", 0) == 0 && name.back() == ')') {
    c.kind = CriterionKind::R2LRW;
    detail::parse_kv_args(name.substr(6, name.size() - 7), c);
  } else if (name.rfind("r2hs(", 0) == 0 && name.back() == ')') {
    c.kind = CriterionKind::R2HS_adj;
    detail::parse_kv_args(name.substr(5, name.size() - 6), c);
  } else {
    throw std::invalid_argument("unknown criterion identifier: " +
                                std::string(name));
  }
  return c;
}

}  // namespace betasel

#endif  // BETASEL_CRITERIA_HPP
