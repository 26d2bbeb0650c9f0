#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "resmet/core.hpp"

namespace resmet {

enum class AdjustmentMethod { holm, benjamini_hochberg, benjamini_yekutieli, none };

inline std::string to_string(AdjustmentMethod m) {
  switch (m) {
    case AdjustmentMethod::holm: return "holm";
    case AdjustmentMethod::benjamini_hochberg: return "bh";
    case AdjustmentMethod::benjamini_yekutieli: return "by";
    case AdjustmentMethod::none: return "none";
  }
  throw NumericError("unknown adjustment method");
}

inline AdjustmentMethod adjustment_from_string(const std::string& s) {
  if (s == "holm") return AdjustmentMethod::holm;
  if (s == "bh" || s == "benjamini-hochberg") return AdjustmentMethod::benjamini_hochberg;
  if (s == "by" || s == "benjamini-yekutieli") return AdjustmentMethod::benjamini_yekutieli;
  if (s == "none") return AdjustmentMethod::none;
  throw DataError("unknown adjustment method: " + s);
}

// Holm step-down / BH and BY step-up adjusted p-values, monotonicity
// enforced, capped at 1, output in input order. Ties break by input index
// (stable sort).
inline std::vector<double> adjust_pvalues(const std::vector<double>& p,
                                          AdjustmentMethod method) {
  const std::size_t m = p.size();
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0))
      throw DataError("p-values must lie in [0,1]");
  if (method == AdjustmentMethod::none || m == 0) return p;

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });

  std::vector<double> adj(m);
  if (method == AdjustmentMethod::holm) {
    double running = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      double v = static_cast<double>(m - k) * p[order[k]];
      running = std::max(running, v);
      adj[order[k]] = std::min(1.0, running);
    }
  } else {
    double c = 1.0;
    if (method == AdjustmentMethod::benjamini_yekutieli) {
      c = 0.0;
      for (std::size_t i = 1; i <= m; ++i) c += 1.0 / static_cast<double>(i);
    }
    double running = std::numeric_limits<double>::infinity();
    for (std::size_t k = m; k-- > 0;) {
      double v = c * static_cast<double>(m) / static_cast<double>(k + 1) *
                 p[order[k]];
      running = std::min(running, v);
      adj[order[k]] = std::min(1.0, running);
    }
  }
  return adj;
}

}  // namespace resmet
