#include "parp/autonet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace parp::autonet {

GradCheckReport finite_diff_check(ParamStore& store, const LossFn& loss_fn, double eps) {
  store.zero_grad();
  loss_fn(store);
  std::vector<Tensor> analytic;
  for (const auto& p : store.params()) analytic.push_back(p.grad);

  GradCheckReport report;
  auto params = store.params();
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k].value.size(); ++i) {
      const double saved = params[k].value[i];
      params[k].value[i] = saved + eps;
      store.zero_grad();
      const double up = loss_fn(store);
      params[k].value[i] = saved - eps;
      store.zero_grad();
      const double down = loss_fn(store);
      params[k].value[i] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (!(rel <= report.max_rel_error)) {
        report.max_rel_error = rel;
        report.param = params[k].name;
        report.index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  // Leave the store holding the analytic gradient.
  for (std::size_t k = 0; k < params.size(); ++k) params[k].grad = analytic[k];
  return report;
}

}  // namespace parp::autonet
