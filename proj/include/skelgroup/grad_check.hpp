#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

namespace skelgroup {

struct GradCheckOptions {
  double step = 1e-4;
  // Above this many parameters a seeded random subsample is checked.
  std::size_t max_checked = 10000;
  std::uint64_t seed = 0;
  // Each entry is also differenced at step / 10. If the two estimates differ
  // by more than this relative amount a ReLU/max switch lies inside the wider
  // step; the step keeps shrinking by tenfold (three times at most) until two
  // estimates agree, otherwise the entry is skipped. Zero disables the test.
  double kink_ratio = 1e-5;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// |a - n| / max(|a|, |n|, 1e-12)
double relative_error(double analytic, double numeric);

// Compares `analytic` against central differences of `loss` taken by
// perturbing `params` in place. `loss` must read the current values of
// `params`; every entry is restored before returning.
GradCheckResult grad_check(const std::function<double()>& loss, std::span<double> params,
                           std::span<const double> analytic, const GradCheckOptions& options = {});

}  // namespace skelgroup
