#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "cmlid/tensor.hpp"

namespace cmlid {

// One block of coordinates to perturb: the live tensor the loss reads, and
// the analytic gradient computed for it beforehand.
struct GradCheckTarget {
  std::string name;
  Tensor* value;
  const Tensor* analytic;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_target;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

// Central differences over every coordinate of every target; relative error
// is |a - n| / max(|a|, |n|, 1e-8). loss must be a pure function of the
// targets' current values. Throws std::domain_error on non-finite values.
GradCheckReport grad_check(const std::function<double()>& loss,
                           std::span<const GradCheckTarget> targets, double eps = 1e-5);

double relative_error(double analytic, double numeric);

}  // namespace cmlid
