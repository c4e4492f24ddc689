#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "skelgroup/params.hpp"

namespace skelgroup {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double lr0 = 0.001;

  void validate() const;
};

struct AdamState {
  std::uint64_t step = 0;
  ParamStore first_moment;
  ParamStore second_moment;

  static AdamState for_params(const ParamStore& params);
};

// One bias-corrected Adam update. `trainable` (one flag per layer, empty for
// all) leaves frozen layers and their moments untouched. Throws NumericError
// naming the tensor when a gradient is not finite; nothing is updated then.
void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state, const AdamHyper& hyper, double lr,
               std::span<const std::uint8_t> trainable = {});

// lr0 / 10^floor(epoch / decay_every)
double lr_schedule(std::size_t epoch, double lr0, std::size_t decay_every = 30);

}  // namespace skelgroup
