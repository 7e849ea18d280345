#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sofs/tensor.hpp"

namespace sofs {

struct GradCheckEntry {
  std::string param;
  long long index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  long long elements = 0;
  long long failed = 0;
  double tolerance = 0.0;
  GradCheckEntry worst;
  std::vector<GradCheckEntry> failures;  // every element above tolerance
  bool ok() const { return failed == 0; }
};

// Central-difference verification of analytic gradients.
//
// `f` evaluates the scalar objective on binary64 copies of the parameters;
// each element is perturbed by h = step_scale * max(|p|, 1). The relative
// error per element is |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport grad_check(const std::function<double(const std::vector<TensorD>&)>& f,
                           const std::vector<Tensor>& params,
                           const std::vector<std::string>& names,
                           const std::vector<Tensor>& analytic_grads, double step_scale,
                           double tolerance);

}  // namespace sofs
