#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "skelgroup/layers.hpp"

namespace skelgroup {

struct NamedLayer {
  std::string name;
  LayerParams params;
  friend bool operator==(const NamedLayer&, const NamedLayer&) = default;
};

// Ordered collection of layer parameters. Gradients use the same type with
// an identical layout.
class ParamStore {
 public:
  std::vector<NamedLayer> layers;

  std::size_t parameter_count() const;
  ParamStore zeros_like() const;
  LayerParams& at(std::string_view name);
  const LayerParams& at(std::string_view name) const;
  bool same_layout(const ParamStore& other) const;
  bool all_finite() const;
  void set_zero();
  ParamStore& operator+=(const ParamStore& other);
  ParamStore& operator*=(double scale);

  // Every scalar in layer order, weights before bias.
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& values);

  friend bool operator==(const ParamStore&, const ParamStore&) = default;
};

using ModelParams = ParamStore;
using Gradients = ParamStore;

// Binary checkpoint: "SKGCKPT1", uint32 tensor count, then per tensor
// uint32 name length, name bytes, uint32 rank, uint32 dims, float32 values.
// All integers little-endian. Tensors are named "<layer>.weight" and
// "<layer>.bias".
void write_checkpoint(const ParamStore& params, const std::filesystem::path& path);
ParamStore read_checkpoint(const std::filesystem::path& path);

}  // namespace skelgroup
