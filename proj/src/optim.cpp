#include "skelgroup/optim.hpp"

#include <cmath>

#include "skelgroup/error.hpp"

namespace skelgroup {

void AdamHyper::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adam: beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam: beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("adam: epsilon must be positive");
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ConfigError("adam: lr0 must be positive");
}

AdamState AdamState::for_params(const ParamStore& params) {
  return {0, params.zeros_like(), params.zeros_like()};
}

void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state, const AdamHyper& hyper, double lr,
               std::span<const std::uint8_t> trainable) {
  if (!params.same_layout(grads) || !params.same_layout(state.first_moment) ||
      !params.same_layout(state.second_moment)) {
    throw ConfigError("adam_step: parameters, gradients and moments differ in layout");
  }
  if (!trainable.empty() && trainable.size() != params.layers.size()) {
    throw ConfigError("adam_step: trainable mask needs one flag per layer");
  }
  auto active = [&](std::size_t i) { return trainable.empty() || trainable[i]; };
  for (std::size_t i = 0; i < grads.layers.size(); ++i) {
    if (!active(i)) continue;
    const auto& g = grads.layers[i];
    if (!g.params.weight.all_finite()) throw NumericError("adam_step: non-finite gradient in " + g.name + ".weight");
    if (!g.params.bias.all_finite()) throw NumericError("adam_step: non-finite gradient in " + g.name + ".bias");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(hyper.beta1, t);
  const double correction2 = 1.0 - std::pow(hyper.beta2, t);
  auto update = [&](Tensor& theta, const Tensor& g, Tensor& m, Tensor& v) {
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * g[j];
      v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      theta[j] -= lr * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
    }
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    if (!active(i)) continue;
    auto& p = params.layers[i].params;
    const auto& g = grads.layers[i].params;
    auto& m = state.first_moment.layers[i].params;
    auto& v = state.second_moment.layers[i].params;
    update(p.weight, g.weight, m.weight, v.weight);
    update(p.bias, g.bias, m.bias, v.bias);
  }
}

double lr_schedule(std::size_t epoch, double lr0, std::size_t decay_every) {
  if (decay_every == 0) return lr0;
  const std::size_t drops = epoch / decay_every;
  return lr0 / std::pow(10.0, static_cast<double>(drops));
}

}  // namespace skelgroup
