#include "dsrdiff/schedule.hpp"

#include <cmath>

namespace dsrdiff {

NoiseSchedule build_schedule(int steps, double beta_start, double beta_end) {
  require(steps >= 1, "build_schedule: steps must be >= 1");
  require(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end,
          "build_schedule: need 0 < beta_start <= beta_end < 1");
  if (steps > 1) {
    require(beta_start < beta_end,
            "build_schedule: beta must strictly increase for steps > 1");
  }
  NoiseSchedule s;
  s.steps = steps;
  s.beta.resize(static_cast<size_t>(steps));
  s.alpha.resize(static_cast<size_t>(steps));
  s.alpha_bar.resize(static_cast<size_t>(steps));
  s.sqrt_alpha_bar.resize(static_cast<size_t>(steps));
  s.sqrt_one_minus_alpha_bar.resize(static_cast<size_t>(steps));
  double prod = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double b =
        steps == 1 ? beta_start
                   : beta_start + i * (beta_end - beta_start) / (steps - 1);
    s.beta[static_cast<size_t>(i)] = b;
    s.alpha[static_cast<size_t>(i)] = 1.0 - b;
    prod *= 1.0 - b;
    s.alpha_bar[static_cast<size_t>(i)] = prod;
    s.sqrt_alpha_bar[static_cast<size_t>(i)] = std::sqrt(prod);
    s.sqrt_one_minus_alpha_bar[static_cast<size_t>(i)] = std::sqrt(1.0 - prod);
  }
  return s;
}

}  // namespace dsrdiff
