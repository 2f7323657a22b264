#pragma once

#include <vector>

#include "dsrdiff/common.hpp"

namespace dsrdiff {

// Linear variance schedule; index i holds step t = i + 1. All arrays are
// computed in double precision (alpha_bar at T=4 is ~1.7e-3, so downstream
// divisions are sensitive to rounding).
struct NoiseSchedule {
  int steps = 0;  // T
  std::vector<double> beta;
  std::vector<double> alpha;                     // 1 - beta
  std::vector<double> alpha_bar;                 // running product of alpha
  std::vector<double> sqrt_alpha_bar;
  std::vector<double> sqrt_one_minus_alpha_bar;

  double beta_at(int t) const { return beta.at(static_cast<size_t>(t - 1)); }
  double alpha_at(int t) const { return alpha.at(static_cast<size_t>(t - 1)); }
  double alpha_bar_at(int t) const { return alpha_bar.at(static_cast<size_t>(t - 1)); }
};

// beta_t = beta_start + (t-1) * (beta_end - beta_start) / (T-1).
// T = 1 degenerates to the single value beta_start (== beta_end).
NoiseSchedule build_schedule(int steps, double beta_start, double beta_end);

}  // namespace dsrdiff
