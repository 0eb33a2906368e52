#include "mdaforge/adamw.hpp"

#include <cmath>
#include <string>

#include "mdaforge/error.hpp"
#include "mdaforge/kernels.hpp"

namespace mdaforge {

void AdamW::step(std::span<Matrix* const> params, std::span<const Matrix* const> grads) {
  if (params.size() != grads.size()) throw Error("adamw: parameter and gradient counts differ");
  if (first_moment_.empty()) {
    for (const Matrix* p : params) {
      first_moment_.emplace_back(p->rows(), p->cols());
      second_moment_.emplace_back(p->rows(), p->cols());
    }
  }
  if (first_moment_.size() != params.size()) throw Error("adamw: parameter set changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(first_moment_[i])) {
      throw ShapeError("adamw: parameter " + std::to_string(i) + " is " + params[i]->shape() +
                       " but gradient is " + grads[i]->shape());
    }
    if (!grads[i]->all_finite()) {
      throw NonFiniteError("adamw: non-finite gradient for parameter " + std::to_string(i));
    }
  }

  ++step_;
  const double t = static_cast<double>(step_);
  const kernels::AdamWCoefficients c{
      config_.lr,
      config_.beta1,
      config_.beta2,
      config_.eps,
      config_.weight_decay,
      1.0 - std::pow(config_.beta1, t),
      1.0 - std::pow(config_.beta2, t),
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    kernels::adamw_update(params[i]->values(), grads[i]->values(), first_moment_[i].values(),
                          second_moment_[i].values(), c);
  }
}

}  // namespace mdaforge
