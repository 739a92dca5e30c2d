#ifndef BETASEL_SELECTION_HPP
#define BETASEL_SELECTION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "betasel/criteria.hpp"
#include "betasel/data.hpp"
#include "betasel/estimation.hpp"

namespace betasel {

/// Candidate covariate pools for the two submodels; enumeration is always
/// all-subsets with intercepts included in every candidate.
struct SearchSpace {
  std::vector<std::string> mean_pool;
  std::vector<std::string> disp_pool;
  Link mean_link = Link::logit;
  Link disp_link = Link::logit;
};

struct SelectionOptions {
  FitOptions fit;
  int threads = 0;  // 0 = all hardware threads
};

struct RankedCandidate {
  ModelSpec spec;
  double value = std::numeric_limits<double>::quiet_NaN();
  int k = 0;
  bool converged = false;
  bool skipped = false;  // criterion undefined or fit not attemptable
  std::string note;
  std::size_t enum_index = 0;
};

struct StepDetail {
  std::string step;
  std::string criterion;
  ModelSpec winner;
  std::size_t fits_attempted = 0;
};

/// Outcome of one search: the winning spec, the ranked converged
/// candidates, everything that was excluded and why, and fit accounting.
struct SelectionReport {
  ModelSpec winner;
  std::vector<RankedCandidate> ranking;   // best first
  std::vector<RankedCandidate> excluded;  // non-converged or skipped
  std::size_t fits_attempted = 0;
  std::size_t fits_converged = 0;
  std::string scheme;
  std::vector<StepDetail> step_details;
};

inline constexpr int kMaxPoolSize = 20;

/// All 2^m subsets of the pool in binary counting order (bit i selects
/// pool[i]); the intercept is implicit in every candidate.
inline std::vector<std::vector<std::string>> enumerate_candidates(
    const std::vector<std::string>& pool) {
  if (pool.size() > static_cast<std::size_t>(kMaxPoolSize)) {
    throw std::invalid_argument(
        "candidate pool has " + std::to_string(pool.size()) +
        " covariates; refusing to enumerate 2^" +
        std::to_string(pool.size()) +
        " subsets (cap is 20, combinatorial cost)");
  }
  const std::size_t m = pool.size();
  std::vector<std::vector<std::string>> out;
  out.reserve(std::size_t{1} << m);
  for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
    std::vector<std::string> subset;
    for (std::size_t i = 0; i < m; ++i) {
      if (mask & (std::size_t{1} << i)) subset.push_back(pool[i]);
    }
    out.push_back(std::move(subset));
  }
  return out;
}

namespace detail {

template <class F>
inline void parallel_for(std::size_t count, int threads, F&& body) {
  if (count == 0) return;
  int nthreads = threads > 0
                     ? threads
                     : static_cast<int>(std::thread::hardware_concurrency());
  if (nthreads < 1) nthreads = 1;
  if (static_cast<std::size_t>(nthreads) > count) {
    nthreads = static_cast<int>(count);
  }
  if (nthreads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  std::mutex err_mutex;
  for (int w = 0; w < nthreads; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::size_t i = static_cast<std::size_t>(w); i < count;
             i += static_cast<std::size_t>(nthreads)) {
          body(i);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

/// Fit and rank every (mean subset x disp subset) pair. Results are
/// gathered in enumeration order regardless of worker completion order, so
/// reports are deterministic.
inline SelectionReport run_search(
    const Dataset& ds,
    const std::vector<std::vector<std::string>>& mean_subsets,
    const std::vector<std::vector<std::string>>& disp_subsets,
    const SearchSpace& space, const CriterionConfig& crit,
    const SelectionOptions& opts, std::string scheme_label) {
  const std::size_t nm = mean_subsets.size();
  const std::size_t nd = disp_subsets.size();
  const std::size_t total = nm * nd;

  double loglik_null = std::numeric_limits<double>::quiet_NaN();
  if (crit.needs_null_fit()) {
    ModelSpec null_spec;
    null_spec.mean_link = space.mean_link;
    null_spec.disp_link = space.disp_link;
    const FitResult null_fit = fit_mle(ds, null_spec, opts.fit);
    if (!null_fit.converged) {
      throw std::runtime_error(
          "selection: intercepts-only reference fit did not converge");
    }
    loglik_null = null_fit.loglik;
  }

  std::vector<RankedCandidate> all(total);
  parallel_for(total, opts.threads, [&](std::size_t i) {
    RankedCandidate& cand = all[i];
    cand.enum_index = i;
    ModelSpec spec;
    spec.mean_terms = mean_subsets[i / nd];
    spec.disp_terms = disp_subsets[i % nd];
    spec.mean_link = space.mean_link;
    spec.disp_link = space.disp_link;
    cand.spec = spec;
    cand.k = spec.k();
    try {
      const FitResult fit = fit_mle(ds, spec, opts.fit);
      cand.converged = fit.converged;
      if (!fit.converged) {
        cand.note = "fit did not converge";
        return;
      }
      cand.value = evaluate_criterion(crit, ds, fit, loglik_null);
    } catch (const std::exception& ex) {
      cand.skipped = true;
      cand.note = ex.what();
    }
  });

  SelectionReport report;
  report.scheme = std::move(scheme_label);
  report.fits_attempted = total;
  for (auto& cand : all) {
    if (cand.converged) ++report.fits_converged;
    if (cand.converged && !cand.skipped && std::isfinite(cand.value)) {
      report.ranking.push_back(std::move(cand));
    } else {
      report.excluded.push_back(std::move(cand));
    }
  }
  std::sort(report.ranking.begin(), report.ranking.end(),
            [&crit](const RankedCandidate& a, const RankedCandidate& b) {
              if (a.value != b.value) {
                return criterion_better(crit, a.value, b.value);
              }
              if (a.k != b.k) return a.k < b.k;  // ties: smaller model wins
              return a.enum_index < b.enum_index;
            });
  if (report.ranking.empty()) {
    throw std::runtime_error(
        "selection: no candidate produced a converged fit with a defined "
        "criterion value");
  }
  report.winner = report.ranking.front().spec;
  return report;
}

}  // namespace detail

/// Exhaustive joint selection over both submodels.
inline SelectionReport joint_select(const Dataset& ds,
                                    const SearchSpace& space,
                                    const CriterionConfig& crit,
                                    const SelectionOptions& opts = {}) {
  return detail::run_search(ds, enumerate_candidates(space.mean_pool),
                            enumerate_candidates(space.disp_pool), space,
                            crit, opts, "joint/" + crit.label);
}

/// Mean-submodel search with the dispersion terms held fixed.
inline SelectionReport select_mean_given_disp(
    const Dataset& ds, const SearchSpace& space,
    const std::vector<std::string>& fixed_disp_terms,
    const CriterionConfig& crit, const SelectionOptions& opts = {}) {
  return detail::run_search(ds, enumerate_candidates(space.mean_pool),
                            {fixed_disp_terms}, space, crit, opts,
                            "mean-given-disp/" + crit.label);
}

/// Dispersion-submodel search with the mean terms held fixed.
inline SelectionReport select_disp_given_mean(
    const Dataset& ds, const SearchSpace& space,
    const std::vector<std::string>& fixed_mean_terms,
    const CriterionConfig& crit, const SelectionOptions& opts = {}) {
  return detail::run_search(ds, {fixed_mean_terms},
                            enumerate_candidates(space.disp_pool), space,
                            crit, opts, "disp-given-mean/" + crit.label);
}

/// Mean-submodel search under an intercept-only dispersion submodel.
inline SelectionReport select_mean_constant_disp(
    const Dataset& ds, const SearchSpace& space, const CriterionConfig& crit,
    const SelectionOptions& opts = {}) {
  return detail::run_search(ds, enumerate_candidates(space.mean_pool), {{}},
                            space, crit, opts,
                            "mean-constant-disp/" + crit.label);
}

/// A two step scheme: one criterion for the constant-dispersion mean
/// search, another for the dispersion search given the selected mean.
struct TwoStepScheme {
  CriterionConfig step1;
  CriterionConfig step2;
  std::string name;
};

/// Named presets PS1..PS7.
inline TwoStepScheme two_step_preset(std::string_view name) {
  TwoStepScheme s;
  s.name = std::string(name);
  if (name == "PS1") {
    s.step1 = parse_criterion("sicc");
    s.step2 = parse_criterion("r2lrw:w4");
  } else if (name == "PS2") {
    s.step1 = parse_criterion("sicc");
    s.step2 = parse_criterion("r2d:D3");
  } else if (name == "PS3") {
    s.step1 = parse_criterion("sicc");
    s.step2 = parse_criterion("sicc");
  } else if (name == "PS4") {
    s.step1 = parse_criterion("hqc");
    s.step2 = parse_criterion("hqc");
  } else if (name == "PS5") {
    s.step1 = parse_criterion("aic");
    s.step2 = parse_criterion("r2lrw:w4");
  } else if (name == "PS6") {
    s.step1 = parse_criterion("r2lrw:w4");
    s.step2 = parse_criterion("r2d:D3");
  } else if (name == "PS7") {
    s.step1 = parse_criterion("r2lrw:w5");
    s.step2 = parse_criterion("r2lrw:w5");
  } else {
    throw std::invalid_argument("unknown two-step scheme: " +
                                std::string(name));
  }
  return s;
}

/// Sample-size guideline: PS1 for n <= 50 (PS5 is the documented
/// alternative), PS4 for larger samples.
inline TwoStepScheme recommend_scheme(Eigen::Index n) {
  if (n < 1) throw std::invalid_argument("recommend_scheme: n must be >= 1");
  return two_step_preset(n <= 50 ? "PS1" : "PS4");
}

/// Fast two step selection: (1) select mean terms under constant
/// dispersion, (2) select dispersion terms with the step-1 mean frozen.
inline SelectionReport two_step_select(const Dataset& ds,
                                       const SearchSpace& space,
                                       const TwoStepScheme& scheme,
                                       const SelectionOptions& opts = {}) {
  SelectionReport step1 =
      select_mean_constant_disp(ds, space, scheme.step1, opts);
  const std::vector<std::string> mean_terms = step1.winner.mean_terms;
  SelectionReport step2 =
      select_disp_given_mean(ds, space, mean_terms, scheme.step2, opts);

  SelectionReport report;
  report.scheme = "two-step/" + scheme.name;
  report.winner = step2.winner;
  report.ranking = std::move(step2.ranking);
  report.excluded = std::move(step2.excluded);
  report.fits_attempted = step1.fits_attempted + step2.fits_attempted;
  report.fits_converged = step1.fits_converged + step2.fits_converged;
  report.step_details.push_back(
      {"step 1: mean terms under constant dispersion", scheme.step1.label,
       step1.winner, step1.fits_attempted});
  report.step_details.push_back(
      {"step 2: dispersion terms given the step-1 mean", scheme.step2.label,
       step2.winner, step2.fits_attempted});
  return report;
}

}  // namespace betasel

#endif  // BETASEL_SELECTION_HPP
