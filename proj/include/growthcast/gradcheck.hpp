// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>

#include "growthcast/optim.hpp"

namespace growthcast {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares the gradients already stored in each Parameter::grad against
/// central differences (f(w+h) - f(w-h)) / 2h, element by element.
/// Relative error is |a - n| / max(|a|, |n|, guard). A disagreement no larger
/// than the difference quotient's own rounding floor (32 ulps of the objective
/// over 2h) counts as agreement, so gradients that are exactly zero by
/// construction are not scored on round-off.
inline GradCheckResult finite_diff_check(const std::function<double()>& f,
                                         std::span<Parameter<double>* const> params,
                                         double h = 1e-5, double guard = 1e-6) {
  GradCheckResult r;
  for (auto* p : params) {
    auto w = p->value.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + h;
      const double plus = f();
      w[i] = saved - h;
      const double minus = f();
      w[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw NumericError("finite_diff_check: non-finite objective at " + p->name + "[" +
                           std::to_string(i) + "]");
      }
      const double numeric = (plus - minus) / (2.0 * h);
      const double analytic = p->grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), guard});
      const double floor = 32.0 * std::numeric_limits<double>::epsilon() *
                           std::max(std::abs(plus), std::abs(minus)) / (2.0 * h);
      const double gap = std::abs(analytic - numeric);
      const double err = gap <= floor ? 0.0 : gap / denom;
      if (err > r.max_relative_error || r.worst_parameter.empty()) {
        r = {err, p->name, i, analytic, numeric};
      }
    }
  }
  return r;
}

}  // namespace growthcast
