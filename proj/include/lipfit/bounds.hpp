#pragma once

#include "lipfit/data.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lipfit {

// (l_f + l_g)·dist + ε̄ + ε
double pointwise_bound(double l_f, double l_g, double dist, double eps_bar, double eps);
// (l_f + l_g)·h + ε̄ + ε
double uniform_bound(double l_f, double l_g, double h, double eps_bar, double eps);
// 2(l_g·h + ε)
double thm1_bound(double l_g, double h, double eps);
// (2 l_g + ρ)·h + 2ε
double thm2_bound(double l_g, double rho, double h, double eps);
// k1·(log(k2 N/δ)/N)^(1/n)
double thm4_radius(int n, double N, double delta, double k1, double k2);
// (2 l_g + ρ)·thm4_radius + 2ε
double thm4_bound(double l_g, double rho, double eps, int n, double N, double delta, double k1, double k2);

struct Thm4Calibration {
  int n = 1;
  double delta = 0.1;
  int trials = 0;
  std::vector<Index> sizes;
  std::vector<double> quantiles;  // (1−δ) quantile of the covering radius per size
  double k1 = 0.0;
  double k2 = 0.0;
  double r2 = 0.0;            // fit of log q against the radius model
  double slope = 0.0;         // least-squares slope of log q on log N
  double rate_slope = 0.0;    // same after removing the (1/n)·log log(k2 N/δ) factor
  std::optional<Index> n0;    // smallest size from which every relative residual is under threshold
  std::vector<double> residuals;  // log q − model, per size
  std::string estimator;      // how each covering radius was estimated

  nlohmann::json to_json() const;
};

struct CalibrationOptions {
  double residual_threshold = 0.1;  // on |log q − model|
  // Grid resolution per axis for n ≥ 2; 0 picks a default by dimension.
  Index resolution = 0;
  Index refine_top = 32;
};

// Monte Carlo estimate of the covering radius quantile of N uniform points
// on [0,1]^n, followed by a least-squares fit of
//   log q = log k1 + (1/n)·(log log(k2 N/δ) − log N).
// n = 1 uses the exact covering radius of the sorted sample.
Thm4Calibration calibrate_thm4_constants(int n, const std::vector<Index>& sizes, int trials, double delta,
                                         std::uint64_t seed, const CalibrationOptions& opts = {});

// Exact covering radius of points on [lo, hi].
double covering_radius_1d(std::vector<double> xs, double lo, double hi);

struct BoundInputs {
  std::optional<double> l_g;  // absent: L_data is used as a proxy
  double l_f = 0.0;
  double h = 0.0;
  double eps_bar = 0.0;
  double eps = 0.0;
  double rho = 0.0;
  int n = 1;
  double N = 1.0;
  double delta = 0.1;
  double k1 = 1.0;
  double k2 = 1.0;
  double l_data = 0.0;

  void validate() const;
};

struct BoundReport {
  BoundInputs inputs;
  double l_g_used = 0.0;
  bool l_g_is_proxy = false;
  bool h_is_lower_estimate = true;
  double uniform = 0.0;
  double thm1 = 0.0;
  double thm2 = 0.0;
  std::optional<double> thm4;  // needs N ≥ 2 and k2·N/δ > 1
  std::vector<std::string> caveats;

  nlohmann::json to_json() const;
};

BoundReport bound_report(const BoundInputs& in);

}  // namespace lipfit
