// Central finite-difference verification of hand-derived backward passes.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "deunet/tensor.hpp"

namespace deunet {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst;  // component behind max_rel_err, or the non-finite failure
  bool finite = true;

  bool ok(double tol) const { return finite && max_rel_err < tol; }
};

// One named buffer the objective depends on. `value` is perturbed in place,
// `analytic` holds d(objective)/d(value) as computed by the backward pass.
struct FdTarget {
  std::string name;
  double* value = nullptr;
  const double* analytic = nullptr;
  std::int64_t n = 0;
};

// Compares `analytic` against (J(x+eps) - J(x-eps)) / (2 eps) component-wise.
// Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
// eps must lie in [1e-7, 1e-4].
GradCheckReport fd_check_scalar(const std::function<double()>& objective,
                                const std::vector<FdTarget>& targets, double eps);

// Same check over a ladder of eps values: each component keeps its best
// (smallest) relative error, moving to the next eps only while above
// accept_rel. Large eps resolves components near the roundoff floor; small
// eps resolves components whose +/-eps window would straddle a kink of the
// piecewise-smooth objective (ReLU, pooling ties, bilinear lattice).
GradCheckReport fd_check_scalar_multi(const std::function<double()>& objective,
                                      const std::vector<FdTarget>& targets,
                                      const std::vector<double>& eps_ladder,
                                      double accept_rel);

// Tensor-in / tensor-out convenience wrapper: projects the op output onto a
// random direction u drawn from rng, so the scalar objective is sum(u * f(x)).
// backward(inputs, u) must return one gradient tensor per input.
using TensorFn = std::function<Tensor(const std::vector<Tensor>&)>;
using TensorBackwardFn =
    std::function<std::vector<Tensor>(const std::vector<Tensor>&, const Tensor&)>;

GradCheckReport check_gradient(const TensorFn& forward, const TensorBackwardFn& backward,
                               std::vector<Tensor> inputs, double eps, Rng& rng);

}  // namespace deunet
