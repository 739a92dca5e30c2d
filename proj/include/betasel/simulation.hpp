#ifndef BETASEL_SIMULATION_HPP
#define BETASEL_SIMULATION_HPP

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "betasel/beta.hpp"
#include "betasel/selection.hpp"

namespace betasel {

/// Deterministic per-stream seed derivation (splitmix64 finalizer), so
/// replications can run in parallel without stream overlap.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Data generating process for the selection experiments: four candidate
/// covariates drawn once from U(0,1) and kept fixed, logit links in both
/// submodels, and Table-style coefficient presets.
struct DgpConfig {
  Eigen::VectorXd beta;   // length 5, intercept first
  Eigen::VectorXd gamma;  // length 5, intercept first
  int n = 100;
  std::uint64_t seed = 1;
  int model_id = 0;  // 0 = custom coefficients

  DgpConfig() : beta(Eigen::VectorXd::Zero(5)), gamma(Eigen::VectorXd::Zero(5)) {}
};

/// Coefficient presets for the four study models. Models 1 and 3 have an
/// easily identifiable dispersion submodel; 2 and 4 a weakly identifiable
/// one (coefficients decaying toward zero).
inline DgpConfig model_preset(int model_id, int n, std::uint64_t seed) {
  DgpConfig c;
  c.n = n;
  c.seed = seed;
  c.model_id = model_id;
  switch (model_id) {
    case 1:
      c.beta << 1.5, -1.0, -1.0, 0.0, 0.0;
      c.gamma << -1.0, -1.0, -1.0, 0.0, 0.0;
      break;
    case 2:
      c.beta << -1.5, 1.0, 1.0, 0.0, 0.0;
      c.gamma << -1.0, -1.25, -0.5, -0.25, 0.0;
      break;
    case 3:
      c.beta << 1.0, -0.75, -0.25, 0.0, 0.0;
      c.gamma << -1.0, -1.0, -1.0, 0.0, 0.0;
      break;
    case 4:
      c.beta << -1.0, 0.75, 0.25, 0.0, 0.0;
      c.gamma << -1.0, -1.25, -0.5, -0.25, 0.0;
      break;
    default:
      throw std::invalid_argument("model preset id must be 1..4, got " +
                                  std::to_string(model_id));
  }
  return c;
}

/// Realized design of one experiment: fixed covariates plus the true
/// per-observation mean and dispersion.
class MonteCarloDgp {
 public:
  explicit MonteCarloDgp(const DgpConfig& config) : config_(config) {
    if (config.beta.size() != 5 || config.gamma.size() != 5) {
      throw std::invalid_argument("DgpConfig expects coefficient length 5");
    }
    const int n = config.n;
    std::mt19937_64 gen(config.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    covariates_.resize(n, 4);
    for (int j = 0; j < 4; ++j) {
      for (int t = 0; t < n; ++t) covariates_(t, j) = unif(gen);
    }
    mu_.resize(n);
    sigma_.resize(n);
    for (int t = 0; t < n; ++t) {
      double eta = config.beta[0];
      double nu = config.gamma[0];
      for (int j = 0; j < 4; ++j) {
        eta += covariates_(t, j) * config.beta[j + 1];
        nu += covariates_(t, j) * config.gamma[j + 1];
      }
      mu_[t] = link_inverse(Link::logit, eta);
      sigma_[t] = link_inverse(Link::logit, nu);
    }
  }

  const DgpConfig& config() const { return config_; }
  const Eigen::VectorXd& mu() const { return mu_; }
  const Eigen::VectorXd& sigma() const { return sigma_; }

  std::vector<std::string> covariate_names() const {
    return {"x2", "x3", "x4", "x5"};
  }

  std::vector<std::string> true_mean_terms() const {
    return nonzero_terms(config_.beta);
  }
  std::vector<std::string> true_disp_terms() const {
    return nonzero_terms(config_.gamma);
  }

  /// Responses for replication `rep`, covariates identical across
  /// replications of one experiment.
  Dataset realize(std::uint64_t rep) const {
    std::mt19937_64 gen(derive_seed(config_.seed, rep));
    Eigen::VectorXd y(config_.n);
    for (int t = 0; t < config_.n; ++t) {
      y[t] = sample(BetaParams(mu_[t], sigma_[t]), gen);
    }
    std::vector<Eigen::VectorXd> cols;
    for (int j = 0; j < 4; ++j) cols.push_back(covariates_.col(j));
    return Dataset(std::move(y), covariate_names(), std::move(cols));
  }

 private:
  static std::vector<std::string> nonzero_terms(const Eigen::VectorXd& coef) {
    static const char* kNames[4] = {"x2", "x3", "x4", "x5"};
    std::vector<std::string> out;
    for (int j = 0; j < 4; ++j) {
      if (coef[j + 1] != 0.0) out.emplace_back(kNames[j]);
    }
    return out;
  }

  DgpConfig config_;
  Eigen::MatrixXd covariates_;
  Eigen::VectorXd mu_, sigma_;
};

enum class Approach {
  joint,
  mean_given_disp,
  disp_given_mean,
  mean_const_disp,
  two_step,
};

inline Approach approach_from_name(std::string_view name) {
  if (name == "joint") return Approach::joint;
  if (name == "mean-given-disp") return Approach::mean_given_disp;
  if (name == "disp-given-mean") return Approach::disp_given_mean;
  if (name == "mean-const-disp") return Approach::mean_const_disp;
  if (name == "two-step") return Approach::two_step;
  throw std::invalid_argument("unknown approach: " + std::string(name));
}

inline std::string_view approach_name(Approach a) {
  switch (a) {
    case Approach::joint: return "joint";
    case Approach::mean_given_disp: return "mean-given-disp";
    case Approach::disp_given_mean: return "disp-given-mean";
    case Approach::mean_const_disp: return "mean-const-disp";
    case Approach::two_step: return "two-step";
  }
  return "?";
}

/// Either a single criterion or a two step scheme drives a selection run.
using SelectionMethod = std::variant<CriterionConfig, TwoStepScheme>;

inline std::string selection_method_label(const SelectionMethod& m) {
  if (std::holds_alternative<CriterionConfig>(m)) {
    return std::get<CriterionConfig>(m).label;
  }
  return std::get<TwoStepScheme>(m).name;
}

/// One cell of a correct-selection frequency table.
struct FrequencyCell {
  std::string approach;
  std::string method;
  int model_id = 0;
  int n = 0;
  std::size_t replications = 0;
  std::size_t correct = 0;
  std::size_t failures = 0;  // replications whose search failed outright

  double percent() const {
    return replications == 0
               ? 0.0
               : 100.0 * static_cast<double>(correct) /
                     static_cast<double>(replications);
  }
};

struct FrequencyTable {
  std::vector<FrequencyCell> cells;
};

/// Run `replications` simulated selections and tabulate how often the
/// winner's term sets equal the true nonzero sets exactly. Failed searches
/// count as incorrect selections. Replications run in parallel; each one
/// derives its own seed from the master seed.
inline FrequencyCell run_frequency_experiment(
    const DgpConfig& config, Approach approach, const SelectionMethod& method,
    std::size_t replications, int threads = 0, const FitOptions& fit_opts = {}) {
  if (replications < 1) {
    throw std::invalid_argument("replications must be >= 1");
  }
  const MonteCarloDgp dgp(config);
  const std::vector<std::string> truth_mean = dgp.true_mean_terms();
  const std::vector<std::string> truth_disp = dgp.true_disp_terms();

  SearchSpace space;
  space.mean_pool = dgp.covariate_names();
  space.disp_pool = dgp.covariate_names();

  SelectionOptions sel_opts;
  sel_opts.fit = fit_opts;
  sel_opts.threads = 1;  // parallelism lives at the replication level

  std::vector<unsigned char> correct(replications, 0);
  std::vector<unsigned char> failed(replications, 0);
  detail::parallel_for(replications, threads, [&](std::size_t rep) {
    try {
      const Dataset ds = dgp.realize(rep);
      SelectionReport report;
      switch (approach) {
        case Approach::joint:
          report = joint_select(ds, space,
                                std::get<CriterionConfig>(method), sel_opts);
          break;
        case Approach::mean_given_disp:
          report = select_mean_given_disp(ds, space, truth_disp,
                                          std::get<CriterionConfig>(method),
                                          sel_opts);
          break;
        case Approach::disp_given_mean:
          report = select_disp_given_mean(ds, space, truth_mean,
                                          std::get<CriterionConfig>(method),
                                          sel_opts);
          break;
        case Approach::mean_const_disp:
          report = select_mean_constant_disp(
              ds, space, std::get<CriterionConfig>(method), sel_opts);
          break;
        case Approach::two_step:
          report = two_step_select(ds, space,
                                   std::get<TwoStepScheme>(method), sel_opts);
          break;
      }
      bool ok = report.winner.mean_terms == truth_mean;
      if (approach == Approach::mean_const_disp ||
          approach == Approach::mean_given_disp) {
        // only the mean submodel is under selection
      } else if (approach == Approach::disp_given_mean) {
        ok = report.winner.disp_terms == truth_disp;
      } else {
        ok = ok && report.winner.disp_terms == truth_disp;
      }
      correct[rep] = ok ? 1 : 0;
    } catch (const std::exception&) {
      failed[rep] = 1;  // counted as an incorrect selection
    }
  });

  FrequencyCell cell;
  cell.approach = std::string(approach_name(approach));
  cell.method = selection_method_label(method);
  cell.model_id = config.model_id;
  cell.n = config.n;
  cell.replications = replications;
  for (std::size_t r = 0; r < replications; ++r) {
    cell.correct += correct[r];
    cell.failures += failed[r];
  }
  return cell;
}

/// Single-covariate efficiency comparison: the response is generated with
/// log-linear precision, then each replication is fitted twice, once with
/// dispersion wrongly held constant and once with a modeled dispersion
/// submodel. Emitted slope estimates feed external density plots.
struct EfficiencyConfig {
  int n = 100;
  double beta1 = -0.5;
  double beta2 = 1.5;   // the slope whose estimator is under study
  double gamma1 = 2.5;  // log-precision intercept
  double gamma2 = 2.0;  // log-precision slope
  std::uint64_t seed = 1;
};

struct EfficiencySamples {
  std::vector<double> fixed_disp;    // slope estimates, constant dispersion
  std::vector<double> varying_disp;  // slope estimates, modeled dispersion
};

inline EfficiencySamples efficiency_experiment(const EfficiencyConfig& config,
                                               std::size_t replications,
                                               int threads = 0,
                                               const FitOptions& fit_opts = {}) {
  if (replications < 1) {
    throw std::invalid_argument("replications must be >= 1");
  }
  const int n = config.n;
  std::mt19937_64 gen(config.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd x(n), mu(n), phi(n);
  for (int t = 0; t < n; ++t) x[t] = unif(gen);
  for (int t = 0; t < n; ++t) {
    mu[t] = link_inverse(Link::logit, config.beta1 + config.beta2 * x[t]);
    phi[t] = std::exp(config.gamma1 + config.gamma2 * x[t]);
  }

  EfficiencySamples out;
  out.fixed_disp.resize(replications);
  out.varying_disp.resize(replications);
  detail::parallel_for(replications, threads, [&](std::size_t rep) {
    std::mt19937_64 g(derive_seed(config.seed, rep));
    Eigen::VectorXd y(n);
    for (int t = 0; t < n; ++t) {
      y[t] = sample(BetaParams(mu[t], sigma_from_phi(phi[t])), g);
    }
    Dataset ds(std::move(y), {"x"}, {x});
    ModelSpec fixed;
    fixed.mean_terms = {"x"};
    ModelSpec varying = fixed;
    varying.disp_terms = {"x"};
    out.fixed_disp[rep] = fit_mle(ds, fixed, fit_opts).beta_hat[1];
    out.varying_disp[rep] = fit_mle(ds, varying, fit_opts).beta_hat[1];
  });
  return out;
}

}  // namespace betasel

#endif  // BETASEL_SIMULATION_HPP
