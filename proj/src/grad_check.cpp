#include "skelgroup/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "skelgroup/error.hpp"

namespace skelgroup {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  return std::abs(analytic - numeric) / scale;
}

GradCheckResult grad_check(const std::function<double()>& loss, std::span<double> params,
                           std::span<const double> analytic, const GradCheckOptions& options) {
  if (params.size() != analytic.size()) {
    throw ConfigError("grad_check: " + std::to_string(params.size()) + " parameters but " +
                      std::to_string(analytic.size()) + " analytic gradients");
  }
  std::vector<std::size_t> indices(params.size());
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  if (indices.size() > options.max_checked) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(indices.begin(), indices.end(), rng);
    indices.resize(options.max_checked);
    std::sort(indices.begin(), indices.end());
  }

  GradCheckResult result;
  auto central = [&](std::size_t i, double step) {
    const double original = params[i];
    params[i] = original + step;
    const double up = loss();
    params[i] = original - step;
    const double down = loss();
    params[i] = original;
    return (up - down) / (2.0 * step);
  };
  for (std::size_t i : indices) {
    double step = options.step;
    double numeric = central(i, step);
    if (!std::isfinite(numeric) || !std::isfinite(analytic[i])) {
      throw NumericError("grad_check: non-finite value at parameter " + std::to_string(i));
    }
    if (options.kink_ratio > 0.0) {
      // Shrink the step until two consecutive decades agree.
      bool agreed = false;
      for (int level = 0; level < 3 && !agreed; ++level) {
        const double finer = central(i, step / 10.0);
        agreed = relative_error(numeric, finer) <= options.kink_ratio;
        if (!agreed) {
          numeric = finer;
          step /= 10.0;
        }
      }
      if (!agreed) {
        ++result.skipped_kinks;
        continue;
      }
    }
    const double err = relative_error(analytic[i], numeric);
    if (err > result.max_relative_error || result.checked == 0) {
      result.max_relative_error = err;
      result.worst_index = i;
      result.worst_analytic = analytic[i];
      result.worst_numeric = numeric;
    }
    ++result.checked;
  }
  return result;
}

}  // namespace skelgroup
