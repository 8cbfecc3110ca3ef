#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "lap/tensor.hpp"

namespace lap {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

struct GradCheckReport {
  size_t checked = 0;
  size_t failures = 0;
  double max_rel_err = 0.0;
  std::string worst;  // "name[i]" of the worst coordinate

  bool ok() const { return failures == 0; }
};

// Central-difference verification of reverse-mode gradients.
//
// loss_fn must rebuild the computation from the current leaf values and
// return the scalar loss. Coordinates where both the analytic and the
// numeric gradient are below zero_floor are treated as matching zeros.
// A coordinate fails only when the relative error exceeds tol AND the
// absolute difference exceeds abs_floor: the central difference of a long
// computation carries ~1e-10 of cancellation noise at step 1e-5, which
// would otherwise drown tiny true gradients.
inline GradCheckReport check_gradients(const std::function<Tensor()>& loss_fn,
                                       const std::vector<NamedParam>& params, double step = 1e-5,
                                       double tol = 1e-4, double zero_floor = 1e-7,
                                       double abs_floor = 1e-9) {
  GradCheckReport report;
  for (const auto& p : params) const_cast<Tensor&>(p.tensor).zero_grad();
  backward(loss_fn());
  for (const auto& p : params) {
    Tensor t = p.tensor;
    auto& vals = t.values_mut();
    const auto& analytic = t.grad();
    for (size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + step;
      const double up = loss_fn().item();
      vals[i] = keep - step;
      const double down = loss_fn().item();
      vals[i] = keep;
      const double fd = (up - down) / (2.0 * step);
      const double a = analytic[i];
      const double scale = std::max(std::abs(a), std::abs(fd));
      ++report.checked;
      if (scale < zero_floor) continue;
      const double rel = std::abs(a - fd) / scale;
      if (std::abs(a - fd) <= abs_floor) continue;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = p.name + "[" + std::to_string(i) + "]";
      }
      if (rel > tol) ++report.failures;
    }
  }
  return report;
}

}  // namespace lap
