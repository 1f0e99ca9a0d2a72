#include "deunet/gradcheck.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace deunet {

GradCheckReport fd_check_scalar(const std::function<double()>& objective,
                                const std::vector<FdTarget>& targets, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-4))
    throw std::invalid_argument("fd_check_scalar: eps must lie in [1e-7, 1e-4]");
  GradCheckReport rep;
  for (const FdTarget& t : targets) {
    for (std::int64_t i = 0; i < t.n; ++i) {
      const double saved = t.value[i];
      t.value[i] = saved + eps;
      const double jp = objective();
      t.value[i] = saved - eps;
      const double jm = objective();
      t.value[i] = saved;
      if (!std::isfinite(jp) || !std::isfinite(jm)) {
        rep.finite = false;
        rep.worst = t.name + "[" + std::to_string(i) + "]: non-finite objective";
        return rep;
      }
      const double numeric = (jp - jm) / (2.0 * eps);
      const double analytic = t.analytic[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst = t.name + "[" + std::to_string(i) + "] analytic=" +
                    std::to_string(analytic) + " numeric=" + std::to_string(numeric);
      }
    }
  }
  return rep;
}

GradCheckReport fd_check_scalar_multi(const std::function<double()>& objective,
                                      const std::vector<FdTarget>& targets,
                                      const std::vector<double>& eps_ladder,
                                      double accept_rel) {
  if (eps_ladder.empty())
    throw std::invalid_argument("fd_check_scalar_multi: empty eps ladder");
  for (double eps : eps_ladder)
    if (!(eps >= 1e-7 && eps <= 1e-4))
      throw std::invalid_argument("fd_check_scalar_multi: eps must lie in [1e-7, 1e-4]");

  GradCheckReport rep;
  for (const FdTarget& t : targets) {
    for (std::int64_t i = 0; i < t.n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      double best_numeric = 0.0;
      bool any_finite = false;
      for (double eps : eps_ladder) {
        const double saved = t.value[i];
        t.value[i] = saved + eps;
        const double jp = objective();
        t.value[i] = saved - eps;
        const double jm = objective();
        t.value[i] = saved;
        if (!std::isfinite(jp) || !std::isfinite(jm)) continue;
        any_finite = true;
        const double numeric = (jp - jm) / (2.0 * eps);
        const double analytic = t.analytic[i];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        const double rel = std::abs(analytic - numeric) / denom;
        if (rel < best) {
          best = rel;
          best_numeric = numeric;
        }
        if (best < accept_rel) break;
      }
      if (!any_finite) {
        rep.finite = false;
        rep.worst = t.name + "[" + std::to_string(i) + "]: non-finite objective";
        return rep;
      }
      if (best > rep.max_rel_err) {
        rep.max_rel_err = best;
        rep.worst = t.name + "[" + std::to_string(i) + "] analytic=" +
                    std::to_string(t.analytic[i]) + " numeric=" + std::to_string(best_numeric);
      }
    }
  }
  return rep;
}

GradCheckReport check_gradient(const TensorFn& forward, const TensorBackwardFn& backward,
                               std::vector<Tensor> inputs, double eps, Rng& rng) {
  Tensor y0 = forward(inputs);
  if (!y0.all_finite()) {
    GradCheckReport rep;
    rep.finite = false;
    rep.worst = "forward output: non-finite";
    return rep;
  }
  Tensor u(y0.shape);
  fill_uniform(u, rng, -1.0, 1.0);

  const std::vector<Tensor> grads = backward(inputs, u);
  if (grads.size() != inputs.size())
    throw std::invalid_argument("check_gradient: backward must return one grad per input");

  auto objective = [&]() {
    const Tensor y = forward(inputs);
    double j = 0.0;
    for (std::int64_t i = 0; i < y.numel(); ++i)
      j += u.data[static_cast<size_t>(i)] * y.data[static_cast<size_t>(i)];
    return j;
  };

  std::vector<FdTarget> targets;
  targets.reserve(inputs.size());
  for (size_t i = 0; i < inputs.size(); ++i) {
    targets.push_back({"input" + std::to_string(i), inputs[i].ptr(), grads[i].ptr(),
                       inputs[i].numel()});
  }
  return fd_check_scalar(objective, targets, eps);
}

}  // namespace deunet
