#pragma once

#include "dgmm/mlp.hpp"

namespace dgmm {

enum class OptimizerKind { rmsprop, sgd };

// Stochastic-gradient optimizer. RMSprop (the default) keeps running
// second-moment accumulators and updates p -= lr * g / (sqrt(E[g^2]) + eps);
// plain SGD is available for cases where exact contraction matters.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::rmsprop;
  double learning_rate = 1e-3;
  double decay = 0.9;
  double epsilon = 1e-8;
  long long step = 0;
  MlpGrads sq;  // running second moments (rmsprop only)

  static OptimizerState for_params(const MlpParams& p, double lr = 1e-3) {
    OptimizerState s;
    s.learning_rate = lr;
    s.sq = MlpGrads::zeros_like(p);
    return s;
  }
};

namespace detail {

template <typename T>
void optimizer_tensor(T& param, const T& grad, T& sq,
                      const OptimizerState& s) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols()) {
    throw ShapeMismatch("optimizer_step: gradient shape mismatch");
  }
  if (s.kind == OptimizerKind::sgd) {
    param -= s.learning_rate * grad;
    return;
  }
  sq = s.decay * sq + (1.0 - s.decay) * grad.cwiseProduct(grad);
  param.array() -=
      s.learning_rate * grad.array() / (sq.array().sqrt() + s.epsilon);
}

}  // namespace detail

inline void optimizer_step(MlpParams& p, const MlpGrads& g, OptimizerState& s) {
  if (g.weights.size() != p.weights.size()) {
    throw ShapeMismatch("optimizer_step: layer count mismatch");
  }
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    detail::optimizer_tensor(p.weights[l], g.weights[l], s.sq.weights[l], s);
    detail::optimizer_tensor(p.biases[l], g.biases[l], s.sq.biases[l], s);
  }
  detail::optimizer_tensor(p.mu_weight, g.mu_weight, s.sq.mu_weight, s);
  detail::optimizer_tensor(p.mu_bias, g.mu_bias, s.sq.mu_bias, s);
  detail::optimizer_tensor(p.logvar_weight, g.logvar_weight,
                           s.sq.logvar_weight, s);
  detail::optimizer_tensor(p.logvar_bias, g.logvar_bias, s.sq.logvar_bias, s);
  ++s.step;
}

}  // namespace dgmm
