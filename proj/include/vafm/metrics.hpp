#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "vafm/errors.hpp"

namespace vafm {

inline double l1_distance(const Eigen::VectorXd &p0, const Eigen::VectorXd &p1) {
  if (p0.size() != p1.size())
    throw std::invalid_argument("l1_distance: length mismatch");
  return (p0 - p1).cwiseAbs().sum();
}

// 1 - L1/(2(1 - min truth)): 1 iff the vectors match, possibly negative.
inline double csmf_accuracy(const Eigen::VectorXd &truth,
                            const Eigen::VectorXd &estimate) {
  const double lo = truth.minCoeff();
  if (!(lo < 1.0))
    throw std::invalid_argument("csmf_accuracy: degenerate truth with min entry 1");
  return 1.0 - l1_distance(truth, estimate) / (2.0 * (1.0 - lo));
}

inline double cause_count_correlation(const Eigen::VectorXd &actual,
                                      const Eigen::VectorXd &predicted) {
  const auto n = actual.size();
  if (n != predicted.size())
    throw std::invalid_argument("cause_count_correlation: length mismatch");
  if (n < 2)
    throw std::invalid_argument("cause_count_correlation: need at least 2 causes");
  const Eigen::VectorXd da = actual.array() - actual.mean();
  const Eigen::VectorXd db = predicted.array() - predicted.mean();
  const double va = da.squaredNorm();
  const double vb = db.squaredNorm();
  if (va <= 0.0 || vb <= 0.0)
    throw std::invalid_argument("cause_count_correlation: zero variance input");
  return da.dot(db) / std::sqrt(va * vb);
}

// Cramer's V from the observed contingency table of two discrete samples,
// computed by the chi-squared route. Negative values mark missing entries
// and drop the whole pair. Deliberately not implemented via delta_squared:
// the two routes cross-check each other.
inline double cramers_v_empirical(const std::vector<int> &y_values,
                                  const std::vector<int> &x_values) {
  if (y_values.size() != x_values.size())
    throw std::invalid_argument("cramers_v_empirical: length mismatch");
  std::map<int, int> y_level, x_level;
  long n = 0;
  for (std::size_t i = 0; i < y_values.size(); ++i) {
    if (y_values[i] < 0 || x_values[i] < 0) continue;
    y_level.emplace(y_values[i], 0);
    x_level.emplace(x_values[i], 0);
    ++n;
  }
  const int my = static_cast<int>(y_level.size());
  const int mx = static_cast<int>(x_level.size());
  if (my < 2 || mx < 2)
    throw std::invalid_argument("cramers_v_empirical: fewer than 2 observed levels");
  int next = 0;
  for (auto &kv : y_level) kv.second = next++;
  next = 0;
  for (auto &kv : x_level) kv.second = next++;

  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(my, mx);
  for (std::size_t i = 0; i < y_values.size(); ++i) {
    if (y_values[i] < 0 || x_values[i] < 0) continue;
    counts(y_level[y_values[i]], x_level[x_values[i]]) += 1.0;
  }
  const Eigen::VectorXd rs = counts.rowwise().sum();
  const Eigen::VectorXd cs = counts.colwise().sum();
  double chi2 = 0.0;
  for (int c = 0; c < my; ++c)
    for (int d = 0; d < mx; ++d) {
      const double expect = rs[c] * cs[d] / n;
      const double diff = counts(c, d) - expect;
      chi2 += diff * diff / expect;
    }
  return std::sqrt(chi2 / (n * (std::min(my, mx) - 1)));
}

// Empirical cause fractions of 1-based labels over a declared C.
inline Eigen::VectorXd empirical_csmf(const std::vector<int> &labels, int C) {
  if (labels.empty()) throw std::invalid_argument("empirical_csmf: no labels");
  Eigen::VectorXd freq = Eigen::VectorXd::Zero(C);
  for (int label : labels) {
    if (label < 1 || label > C)
      throw std::invalid_argument("empirical_csmf: label out of range");
    freq[label - 1] += 1.0;
  }
  return freq / static_cast<double>(labels.size());
}

}  // namespace vafm
