#include "sofs/gradcheck.hpp"

#include <cmath>

#include "sofs/errors.hpp"

namespace sofs {

GradCheckReport grad_check(const std::function<double(const std::vector<TensorD>&)>& f,
                           const std::vector<Tensor>& params,
                           const std::vector<std::string>& names,
                           const std::vector<Tensor>& analytic_grads, double step_scale,
                           double tolerance) {
  if (params.size() != analytic_grads.size() || params.size() != names.size())
    throw ParameterError("grad_check: params, names and gradients must align");
  if (!(step_scale > 0.0)) throw ParameterError("grad_check: step must be positive");

  std::vector<TensorD> work;
  work.reserve(params.size());
  for (const auto& p : params) work.push_back(p.cast<double>());

  GradCheckReport report;
  report.tolerance = tolerance;
  for (size_t k = 0; k < params.size(); ++k) {
    require_same_shape("grad_check", params[k].shape(), analytic_grads[k].shape());
    for (long long i = 0; i < params[k].size(); ++i) {
      const double p0 = work[k][i];
      const double h = step_scale * std::max(std::abs(p0), 1.0);
      work[k][i] = p0 + h;
      const double fp = f(work);
      work[k][i] = p0 - h;
      const double fm = f(work);
      work[k][i] = p0;

      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = analytic_grads[k][i];
      const double rel =
          std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      ++report.elements;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = {names[k], i, analytic, numeric, rel};
      }
      if (rel > tolerance) {
        ++report.failed;
        report.failures.push_back({names[k], i, analytic, numeric, rel});
      }
    }
  }
  return report;
}

}  // namespace sofs
