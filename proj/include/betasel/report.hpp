#ifndef BETASEL_REPORT_HPP
#define BETASEL_REPORT_HPP

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "betasel/criteria.hpp"
#include "betasel/estimation.hpp"
#include "betasel/selection.hpp"
#include "betasel/simulation.hpp"

namespace betasel {

using json = nlohmann::json;

inline std::string spec_to_string(const ModelSpec& spec) {
  auto join = [](const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "+";
      out += s;
    }
    return out.empty() ? std::string("1") : "1+" + out;
  };
  return "mu~" + join(spec.mean_terms) + " | sigma~" + join(spec.disp_terms);
}

inline json spec_to_json(const ModelSpec& spec) {
  return json{{"mean_terms", spec.mean_terms},
              {"disp_terms", spec.disp_terms},
              {"mean_link", std::string(link_name(spec.mean_link))},
              {"disp_link", std::string(link_name(spec.disp_link))}};
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

/// Full fit report: coefficients, standard errors, likelihood, convergence
/// metadata, the response and all per-observation fitted values, plus the
/// criterion values derivable from them.
inline json fit_to_json(const Dataset& ds, const FitResult& fit,
                        double loglik_null) {
  json j;
  j["spec"] = spec_to_json(fit.spec);
  j["n"] = fit.n;
  j["r"] = fit.r();
  j["s"] = fit.s();
  j["k"] = fit.k();
  j["beta_hat"] = to_std(fit.beta_hat);
  j["gamma_hat"] = to_std(fit.gamma_hat);
  j["loglik"] = fit.loglik;
  j["loglik_null"] = loglik_null;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["grad_norm"] = fit.grad_norm;
  if (fit.std_errors.size() > 0) j["std_errors"] = to_std(fit.std_errors);
  j["y"] = to_std(ds.y());
  j["mu_hat"] = to_std(fit.mu_hat);
  j["sigma_hat"] = to_std(fit.sigma_hat);
  j["eta_hat"] = to_std(fit.eta_hat);
  j["nu_hat"] = to_std(fit.nu_hat);
  json crit;
  crit["aic"] = aic_family(fit.loglik, fit.n, fit.k(), CriterionKind::AIC);
  crit["sic"] = aic_family(fit.loglik, fit.n, fit.k(), CriterionKind::SIC);
  crit["r2_fc"] = r2_fc(ds, fit);
  crit["r2_lr"] = r2_lr(fit, loglik_null);
  j["criteria"] = crit;
  return j;
}

/// Human-readable coefficient table in the usual layout.
inline void write_fit_table(std::ostream& os, const FitResult& fit,
                            const Dataset& ds, double loglik_null,
                            RefDist ref) {
  os << "Model: " << spec_to_string(fit.spec) << "\n";
  os << "n = " << fit.n << ", k = " << fit.k()
     << ", log-likelihood = " << std::fixed << std::setprecision(4)
     << fit.loglik << (fit.converged ? "" : "  [NOT CONVERGED]") << "\n\n";
  os << std::left << std::setw(22) << "Parameter" << std::right
     << std::setw(12) << "Estimate" << std::setw(12) << "Std.err"
     << std::setw(10) << "z" << std::setw(12) << "p-value" << "\n";
  if (fit.std_errors.size() > 0) {
    for (const auto& row : wald_table(fit, ref)) {
      os << std::left << std::setw(22) << row.name << std::right
         << std::setw(12) << std::setprecision(4) << row.estimate
         << std::setw(12) << row.std_error << std::setw(10)
         << std::setprecision(3) << row.z << std::setw(12)
         << std::setprecision(4) << row.p << "\n";
    }
  } else {
    const Eigen::VectorXd th = fit.theta();
    for (int i = 0; i < fit.k(); ++i) {
      os << "  theta[" << i << "] = " << th[i]
         << "  (standard errors unavailable)\n";
    }
  }
  os << "\nR2_FC = " << std::setprecision(4) << r2_fc(ds, fit)
     << "\nR2_LR = " << r2_lr(fit, loglik_null) << "\n";
}

inline json selection_report_to_json(const SelectionReport& report) {
  json j;
  j["scheme"] = report.scheme;
  j["winner"] = spec_to_json(report.winner);
  j["fits_attempted"] = report.fits_attempted;
  j["fits_converged"] = report.fits_converged;
  json ranking = json::array();
  for (const auto& c : report.ranking) {
    ranking.push_back(json{{"spec", spec_to_json(c.spec)},
                           {"k", c.k},
                           {"value", c.value},
                           {"converged", c.converged}});
  }
  j["ranking"] = ranking;
  json excluded = json::array();
  for (const auto& c : report.excluded) {
    excluded.push_back(json{{"spec", spec_to_json(c.spec)},
                            {"k", c.k},
                            {"converged", c.converged},
                            {"skipped", c.skipped},
                            {"note", c.note}});
  }
  j["excluded"] = excluded;
  json steps = json::array();
  for (const auto& s : report.step_details) {
    steps.push_back(json{{"step", s.step},
                         {"criterion", s.criterion},
                         {"winner", spec_to_json(s.winner)},
                         {"fits_attempted", s.fits_attempted}});
  }
  j["step_details"] = steps;
  return j;
}

inline void selection_report_to_csv(std::ostream& os,
                                    const SelectionReport& report) {
  os << "rank,mean_terms,disp_terms,k,value,converged\n";
  std::size_t rank = 1;
  auto terms = [](const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "+";
      out += s;
    }
    return out;
  };
  for (const auto& c : report.ranking) {
    os << rank++ << "," << terms(c.spec.mean_terms) << ","
       << terms(c.spec.disp_terms) << "," << c.k << ","
       << std::setprecision(12) << c.value << ","
       << (c.converged ? 1 : 0) << "\n";
  }
  for (const auto& c : report.excluded) {
    os << "-," << terms(c.spec.mean_terms) << "," << terms(c.spec.disp_terms)
       << "," << c.k << ",," << (c.converged ? 1 : 0) << "\n";
  }
}

inline json frequency_table_to_json(const FrequencyTable& table) {
  json rows = json::array();
  for (const auto& c : table.cells) {
    rows.push_back(json{{"approach", c.approach},
                        {"method", c.method},
                        {"model", c.model_id},
                        {"n", c.n},
                        {"replications", c.replications},
                        {"correct", c.correct},
                        {"failures", c.failures},
                        {"percent", c.percent()}});
  }
  return json{{"cells", rows}};
}

/// Wide layout mirroring the study tables: one row per (approach, method,
/// model), one column per sample size.
inline void frequency_table_to_csv(std::ostream& os,
                                   const FrequencyTable& table) {
  std::vector<int> sizes;
  for (const auto& c : table.cells) {
    if (std::find(sizes.begin(), sizes.end(), c.n) == sizes.end()) {
      sizes.push_back(c.n);
    }
  }
  std::sort(sizes.begin(), sizes.end());
  struct Key {
    std::string approach, method;
    int model;
  };
  std::vector<Key> keys;
  for (const auto& c : table.cells) {
    const bool seen =
        std::any_of(keys.begin(), keys.end(), [&](const Key& k) {
          return k.approach == c.approach && k.method == c.method &&
                 k.model == c.model_id;
        });
    if (!seen) keys.push_back({c.approach, c.method, c.model_id});
  }
  os << "approach,method,model";
  for (int n : sizes) os << ",n=" << n;
  os << "\n";
  for (const auto& k : keys) {
    os << k.approach << "," << k.method << "," << k.model;
    for (int n : sizes) {
      const auto it = std::find_if(
          table.cells.begin(), table.cells.end(), [&](const FrequencyCell& c) {
            return c.approach == k.approach && c.method == k.method &&
                   c.model_id == k.model && c.n == n;
          });
      os << ",";
      if (it != table.cells.end()) {
        os << std::fixed << std::setprecision(1) << it->percent();
      }
    }
    os << "\n";
  }
}

inline void efficiency_samples_to_csv(std::ostream& os,
                                      const EfficiencySamples& samples) {
  os << "fixed_disp,varying_disp\n";
  for (std::size_t i = 0; i < samples.fixed_disp.size(); ++i) {
    os << std::setprecision(12) << samples.fixed_disp[i] << ","
       << samples.varying_disp[i] << "\n";
  }
}

}  // namespace betasel

#endif  // BETASEL_REPORT_HPP
