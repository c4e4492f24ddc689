#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skelgroup/model.hpp"

namespace skelgroup {

// K=3, T=4, N=5 with narrow channels.
ModelConfig tiny_gradcheck_config();

struct GradCheckSuiteOptions {
  ModelConfig model = tiny_gradcheck_config();
  std::uint64_t seed = 7;
  double tolerance = 1e-4;
  double step = 1e-4;
  // Negates the analytic gradient of the named check (negative control).
  std::string fault_check;
  // Multiplies every checked function by zero.
  bool constant = false;
};

struct GradCheckLine {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
  std::size_t skipped_kinks = 0;
};

// Finite-difference checks of every layer type in isolation and of every
// parameter tensor of a small full model under the joint loss.
std::vector<GradCheckLine> run_gradcheck_suite(const GradCheckSuiteOptions& options);

}  // namespace skelgroup
