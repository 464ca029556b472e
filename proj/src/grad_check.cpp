#include "cmlid/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmlid {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

GradCheckReport grad_check(const std::function<double()>& loss,
                           std::span<const GradCheckTarget> targets, double eps) {
  GradCheckReport report;
  for (const GradCheckTarget& target : targets) {
    if (target.value->shape() != target.analytic->shape()) {
      throw ShapeError("grad_check: analytic gradient shape mismatch for " + target.name);
    }
    auto values = target.value->data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double plus = loss();
      values[i] = saved - eps;
      const double minus = loss();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double analytic = (*target.analytic)[i];
      if (!std::isfinite(numeric) || !std::isfinite(analytic)) {
        throw std::domain_error("grad_check: non-finite value at " + target.name + "[" +
                                std::to_string(i) + "]");
      }
      const double err = relative_error(analytic, numeric);
      ++report.coordinates;
      if (report.worst_target.empty() || err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_target = target.name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace cmlid
