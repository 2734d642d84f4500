#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "deeppink/errors.hpp"

// Knockoff filtering: turn per-feature importance pairs into statistics
// W_j = Z_j^2 - Z~_j^2, pick a data-dependent threshold, and select
// { j : W_j >= T }. The plain rule scans for
//   #{ j : W_j <= -t } / #{ j : W_j >= t } <= q
// and the knockoff+ rule for
//   (1 + #{ j : W_j <= -t }) / max(1, #{ j : W_j >= t }) <= q
// over t in the unique nonzero values of |W_j|, ascending. No qualifying t
// means an infinite threshold and an empty selection.

namespace deeppink {

enum class ThresholdRule { knockoff, knockoff_plus };

inline const char* to_string(ThresholdRule r) {
  return r == ThresholdRule::knockoff ? "knockoff" : "knockoff+";
}

inline Eigen::VectorXd knockoff_statistic(const Eigen::VectorXd& z,
                                          const Eigen::VectorXd& z_tilde) {
  if (z.size() != z_tilde.size()) {
    throw DimensionMismatch("importance vectors have different lengths");
  }
  return z.array().square() - z_tilde.array().square();
}

inline double threshold(const Eigen::VectorXd& w, double q, ThresholdRule rule) {
  std::vector<double> sorted(w.data(), w.data() + w.size());
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> candidates;
  candidates.reserve(sorted.size());
  for (double v : sorted) {
    const double a = std::abs(v);
    if (a > 0.0) candidates.push_back(a);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  for (double t : candidates) {
    // #{ w <= -t } and #{ w >= t } from the sorted copy
    const auto neg = static_cast<double>(
        std::upper_bound(sorted.begin(), sorted.end(), -t) - sorted.begin());
    const auto pos = static_cast<double>(
        sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
    double ratio;
    if (rule == ThresholdRule::knockoff_plus) {
      ratio = (1.0 + neg) / std::max(1.0, pos);
    } else {
      ratio = (pos == 0.0) ? (neg == 0.0 ? 0.0 : std::numeric_limits<double>::infinity())
                           : neg / pos;
    }
    if (ratio <= q) return t;
  }
  return std::numeric_limits<double>::infinity();
}

struct SelectionReport {
  double threshold = std::numeric_limits<double>::infinity();
  std::vector<int> selected;  // sorted 0-based indices, { j : W_j >= threshold }
  double q = 0.0;
  ThresholdRule rule = ThresholdRule::knockoff_plus;
};

inline SelectionReport select(const Eigen::VectorXd& w, double q, ThresholdRule rule) {
  SelectionReport report;
  report.q = q;
  report.rule = rule;
  report.threshold = threshold(w, q, rule);
  if (std::isfinite(report.threshold)) {
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      if (w[j] >= report.threshold) report.selected.push_back(static_cast<int>(j));
    }
  }
  return report;
}

struct EvalMetrics {
  double fdp = 0.0;    // |S^ \ S0| / max(|S^|, 1)
  double power = 0.0;  // |S^ n S0| / |S0|, 0 when S0 is empty
  int n_selected = 0;
  int n_true = 0;
  bool power_defined = true;  // false iff the true support is empty
};

inline EvalMetrics evaluate(const SelectionReport& report,
                            const std::vector<int>& true_support) {
  std::vector<int> truth = true_support;
  std::sort(truth.begin(), truth.end());

  EvalMetrics m;
  m.n_selected = static_cast<int>(report.selected.size());
  m.n_true = static_cast<int>(truth.size());
  int hits = 0;
  for (int j : report.selected) {
    if (std::binary_search(truth.begin(), truth.end(), j)) ++hits;
  }
  m.fdp = static_cast<double>(m.n_selected - hits) /
          std::max(1.0, static_cast<double>(m.n_selected));
  if (truth.empty()) {
    m.power = 0.0;
    m.power_defined = false;
  } else {
    m.power = static_cast<double>(hits) / static_cast<double>(truth.size());
  }
  return m;
}

}  // namespace deeppink
