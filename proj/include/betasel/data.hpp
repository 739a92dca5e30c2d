#ifndef BETASEL_DATA_HPP
#define BETASEL_DATA_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "betasel/links.hpp"

namespace betasel {

/// Immutable-by-convention container of a response in (0,1) plus named
/// numeric covariate columns of equal length.
class Dataset {
 public:
  Dataset() = default;

  Dataset(Eigen::VectorXd response, std::vector<std::string> names,
          std::vector<Eigen::VectorXd> columns)
      : y_(std::move(response)),
        names_(std::move(names)),
        columns_(std::move(columns)) {
    validate();
  }

  Eigen::Index n() const { return y_.size(); }
  const Eigen::VectorXd& y() const { return y_; }
  const std::vector<std::string>& names() const { return names_; }

  bool has_column(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
  }

  const Eigen::VectorXd& column(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == name) return columns_[i];
    }
    throw std::invalid_argument("Dataset: unknown covariate '" + name + "'");
  }

  /// Parse CSV text with a header row; `response` names the y column, all
  /// remaining columns become covariates. Plain '.' decimal points, no
  /// locale handling.
  static Dataset from_csv(std::istream& in, const std::string& response) {
    std::string line;
    if (!std::getline(in, line)) {
      throw std::invalid_argument("CSV: empty input");
    }
    const std::vector<std::string> header = split_csv_line(line);
    int yidx = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == response) yidx = static_cast<int>(i);
    }
    if (yidx < 0) {
      throw std::invalid_argument("CSV: response column '" + response +
                                  "' not found in header");
    }
    std::vector<std::vector<double>> cells(header.size());
    std::size_t row = 1;
    while (std::getline(in, line)) {
      ++row;
      if (line.empty()) continue;
      const std::vector<std::string> parts = split_csv_line(line);
      if (parts.size() != header.size()) {
        throw std::invalid_argument("CSV: row " + std::to_string(row) +
                                    " has " + std::to_string(parts.size()) +
                                    " fields, expected " +
                                    std::to_string(header.size()));
      }
      for (std::size_t i = 0; i < parts.size(); ++i) {
        cells[i].push_back(parse_number(parts[i], row));
      }
    }
    const std::size_t nrows = cells[yidx].size();
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(
        cells[yidx].data(), static_cast<Eigen::Index>(nrows));
    std::vector<std::string> names;
    std::vector<Eigen::VectorXd> cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (static_cast<int>(i) == yidx) continue;
      names.push_back(header[i]);
      cols.push_back(Eigen::Map<const Eigen::VectorXd>(
          cells[i].data(), static_cast<Eigen::Index>(nrows)));
    }
    return Dataset(std::move(y), std::move(names), std::move(cols));
  }

  static Dataset from_csv_file(const std::string& path,
                               const std::string& response) {
    std::ifstream in(path);
    if (!in) {
      throw std::invalid_argument("cannot open dataset file: " + path);
    }
    return from_csv(in, response);
  }

 private:
  void validate() const {
    if (y_.size() < 1) throw std::invalid_argument("Dataset: empty response");
    for (Eigen::Index t = 0; t < y_.size(); ++t) {
      if (!(y_[t] > 0.0 && y_[t] < 1.0)) {
        throw std::invalid_argument(
            "Dataset: response value " + std::to_string(y_[t]) + " at row " +
            std::to_string(t + 1) + " is outside the open unit interval");
      }
    }
    if (names_.size() != columns_.size()) {
      throw std::invalid_argument("Dataset: names/columns size mismatch");
    }
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (columns_[i].size() != y_.size()) {
        throw std::invalid_argument("Dataset: column '" + names_[i] +
                                    "' length differs from response");
      }
      for (std::size_t j = i + 1; j < names_.size(); ++j) {
        if (names_[i] == names_[j]) {
          throw std::invalid_argument("Dataset: duplicate column name '" +
                                      names_[i] + "'");
        }
      }
    }
  }

  static std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
      // trim whitespace and a possible trailing CR
      const auto b = field.find_first_not_of(" \t\r");
      const auto e = field.find_last_not_of(" \t\r");
      out.push_back(b == std::string::npos ? std::string()
                                           : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  }

  static double parse_number(const std::string& s, std::size_t row) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw std::invalid_argument("CSV: cannot parse numeric field '" + s +
                                  "' in row " + std::to_string(row));
    }
  }

  Eigen::VectorXd y_;
  std::vector<std::string> names_;
  std::vector<Eigen::VectorXd> columns_;
};

/// Which covariates enter each submodel. Intercepts are always implicit, so
/// r = 1 + |mean_terms| and s = 1 + |disp_terms|.
struct ModelSpec {
  std::vector<std::string> mean_terms;
  std::vector<std::string> disp_terms;
  Link mean_link = Link::logit;
  Link disp_link = Link::logit;

  int r() const { return 1 + static_cast<int>(mean_terms.size()); }
  int s() const { return 1 + static_cast<int>(disp_terms.size()); }
  int k() const { return r() + s(); }
};

/// Design matrices for the two submodels, intercept column first.
struct DesignPair {
  Eigen::MatrixXd X;  // n x r, mean submodel
  Eigen::MatrixXd Z;  // n x s, dispersion submodel
};

namespace detail {

inline Eigen::MatrixXd assemble_design(const Dataset& ds,
                                       const std::vector<std::string>& terms) {
  const Eigen::Index n = ds.n();
  Eigen::MatrixXd M(n, 1 + static_cast<Eigen::Index>(terms.size()));
  M.col(0).setOnes();
  for (std::size_t j = 0; j < terms.size(); ++j) {
    M.col(static_cast<Eigen::Index>(j + 1)) = ds.column(terms[j]);
  }
  return M;
}

inline void check_full_rank(const Eigen::MatrixXd& M,
                            const std::vector<std::string>& terms,
                            const char* which) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
  qr.setThreshold(1e-10);
  const Eigen::Index rank = qr.rank();
  if (rank < M.cols()) {
    // pivot order: columns past `rank` are the linearly dependent ones
    std::string offenders;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index i = rank; i < M.cols(); ++i) {
      const Eigen::Index col = perm[i];
      if (!offenders.empty()) offenders += ", ";
      offenders += col == 0 ? std::string("(intercept)")
                            : terms[static_cast<std::size_t>(col - 1)];
    }
    throw std::invalid_argument(std::string(which) +
                                " design matrix is rank deficient; dependent "
                                "columns: " +
                                offenders);
  }
}

}  // namespace detail

/// Assemble (X, Z) for a spec, prepending intercept columns and verifying
/// full column rank at tolerance 1e-10. Errors name the offending columns.
inline DesignPair build_design(const Dataset& ds, const ModelSpec& spec) {
  DesignPair d{detail::assemble_design(ds, spec.mean_terms),
               detail::assemble_design(ds, spec.disp_terms)};
  detail::check_full_rank(d.X, spec.mean_terms, "mean");
  detail::check_full_rank(d.Z, spec.disp_terms, "dispersion");
  return d;
}

/// Map raw scores in [lo, hi] linearly onto [0,1], then shrink any exact
/// endpoint by the usual compression (y (n-1) + 0.5)/n so every value ends
/// up strictly inside (0,1).
inline Eigen::VectorXd rescale_to_unit(const Eigen::VectorXd& raw, double lo,
                                       double hi) {
  if (!(lo < hi)) {
    throw std::invalid_argument("rescale_to_unit: need lo < hi");
  }
  const double n = static_cast<double>(raw.size());
  Eigen::VectorXd out(raw.size());
  for (Eigen::Index t = 0; t < raw.size(); ++t) {
    if (!(raw[t] >= lo && raw[t] <= hi)) {
      throw std::invalid_argument(
          "rescale_to_unit: value " + std::to_string(raw[t]) +
          " lies outside [" + std::to_string(lo) + ", " + std::to_string(hi) +
          "]");
    }
    double v = (raw[t] - lo) / (hi - lo);
    if (v == 0.0 || v == 1.0) v = (v * (n - 1.0) + 0.5) / n;
    out[t] = v;
  }
  return out;
}

}  // namespace betasel

#endif  // BETASEL_DATA_HPP
