#include "lipfit/bounds.hpp"

#include "lipfit/error.hpp"
#include "lipfit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lipfit {

namespace {

void nonneg(double v, const char* name) {
  require(std::isfinite(v) && v >= 0.0, ErrorKind::Argument, std::string(name) + " must be finite and >= 0");
}

}  // namespace

double pointwise_bound(double l_f, double l_g, double dist, double eps_bar, double eps) {
  nonneg(l_f, "l_f");
  nonneg(l_g, "l_g");
  nonneg(dist, "dist");
  nonneg(eps_bar, "eps_bar");
  nonneg(eps, "eps");
  return (l_f + l_g) * dist + eps_bar + eps;
}

double uniform_bound(double l_f, double l_g, double h, double eps_bar, double eps) {
  return pointwise_bound(l_f, l_g, h, eps_bar, eps);
}

double thm1_bound(double l_g, double h, double eps) {
  nonneg(l_g, "l_g");
  nonneg(h, "h");
  nonneg(eps, "eps");
  return 2.0 * (l_g * h + eps);
}

double thm2_bound(double l_g, double rho, double h, double eps) {
  nonneg(l_g, "l_g");
  nonneg(rho, "rho");
  nonneg(h, "h");
  nonneg(eps, "eps");
  return (2.0 * l_g + rho) * h + 2.0 * eps;
}

double thm4_radius(int n, double N, double delta, double k1, double k2) {
  require(n >= 1, ErrorKind::Argument, "n must be >= 1");
  require(N >= 2.0 && std::isfinite(N), ErrorKind::Argument, "N must be >= 2");
  require(delta > 0.0 && delta < 1.0, ErrorKind::Argument, "delta must lie in (0, 1)");
  nonneg(k1, "k1");
  require(k2 > 0.0 && std::isfinite(k2), ErrorKind::Argument, "k2 must be positive");
  require(k2 * N / delta > 1.0, ErrorKind::Argument, "need k2*N/delta > 1");
  return k1 * std::pow(std::log(k2 * N / delta) / N, 1.0 / n);
}

double thm4_bound(double l_g, double rho, double eps, int n, double N, double delta, double k1, double k2) {
  return thm2_bound(l_g, rho, thm4_radius(n, N, delta, k1, k2), eps);
}

double covering_radius_1d(std::vector<double> xs, double lo, double hi) {
  require(!xs.empty(), ErrorKind::Argument, "covering_radius_1d: no points");
  require(lo < hi, ErrorKind::Domain, "covering_radius_1d: empty interval");
  std::sort(xs.begin(), xs.end());
  double h = std::max(xs.front() - lo, hi - xs.back());
  for (std::size_t i = 1; i < xs.size(); ++i) h = std::max(h, 0.5 * (xs[i] - xs[i - 1]));
  return h;
}

// --- calibration ----------------------------------------------------------------

namespace {

double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double m = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sx += x[i], sy += y[i];
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  require(sxx > 0.0, ErrorKind::Calibration, "calibration: sample sizes are not distinct");
  return {sxy / sxx, my - sxy / sxx * mx};
}

}  // namespace

nlohmann::json Thm4Calibration::to_json() const {
  return {{"n", n},
          {"delta", delta},
          {"trials", trials},
          {"sizes", sizes},
          {"quantiles", quantiles},
          {"k1", k1},
          {"k2", k2},
          {"r2", r2},
          {"slope", slope},
          {"rate_slope", rate_slope},
          {"n0", n0 ? nlohmann::json(*n0) : nlohmann::json(nullptr)},
          {"residuals", residuals},
          {"estimator", estimator}};
}

Thm4Calibration calibrate_thm4_constants(int n, const std::vector<Index>& sizes, int trials, double delta,
                                         std::uint64_t seed, const CalibrationOptions& opts) {
  require(n >= 1, ErrorKind::Argument, "calibration: n must be >= 1");
  require(trials >= 20, ErrorKind::Argument, "calibration: need at least 20 trials");
  require(delta > 0.0 && delta < 1.0, ErrorKind::Argument, "calibration: delta must lie in (0, 1)");
  require(sizes.size() >= 2, ErrorKind::Argument, "calibration: need at least two sample sizes");
  const auto [mn, mx] = std::minmax_element(sizes.begin(), sizes.end());
  require(*mn >= 2, ErrorKind::Argument, "calibration: sample sizes must be >= 2");
  require(static_cast<double>(*mx) >= 10.0 * static_cast<double>(*mn), ErrorKind::Argument,
          "calibration: sample sizes must span at least one decade");

  Thm4Calibration cal;
  cal.n = n;
  cal.delta = delta;
  cal.trials = trials;
  cal.sizes = sizes;

  const Domain cube = Domain::unit_cube(n);
  Index resolution = opts.resolution;
  if (resolution == 0) resolution = n == 2 ? 401 : n == 3 ? 65 : 17;
  cal.estimator = n == 1 ? "exact (sorted gaps)"
                         : "grid " + std::to_string(resolution) + "^" + std::to_string(n) + " + pattern search on top " +
                               std::to_string(opts.refine_top) + " probes (lower estimate)";

  Rng master(seed);
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    std::vector<double> radii;
    radii.reserve(static_cast<std::size_t>(trials));
    for (int t = 0; t < trials; ++t) {
      Rng rng = master.fork(static_cast<std::uint64_t>(s) * 1000003ULL + static_cast<std::uint64_t>(t));
      const Tensor pts = sample_uniform(cube, sizes[s], rng.next_u64());
      if (n == 1) {
        radii.push_back(covering_radius_1d(std::vector<double>(pts.data(), pts.data() + pts.size()), 0.0, 1.0));
      } else {
        CoveringOptions co;
        co.refine_top = opts.refine_top;
        radii.push_back(covering_radius(pts, cube, CoveringMode::ExactGrid, resolution, 0, co).radius);
      }
    }
    cal.quantiles.push_back(quantile(radii, 1.0 - delta));
  }

  std::vector<double> log_n, log_q;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    require(cal.quantiles[s] > 0.0, ErrorKind::Calibration, "calibration: zero covering radius");
    log_n.push_back(std::log(static_cast<double>(sizes[s])));
    log_q.push_back(std::log(cal.quantiles[s]));
  }
  cal.slope = least_squares(log_n, log_q).slope;

  double mean_q = 0.0;
  for (double v : log_q) mean_q += v;
  mean_q /= static_cast<double>(log_q.size());
  double sst = 0.0;
  for (double v : log_q) sst += (v - mean_q) * (v - mean_q);
  require(sst > 0.0, ErrorKind::Calibration, "calibration: quantiles do not vary with N");

  const double inv_n = 1.0 / static_cast<double>(n);
  const double log_nmin = std::log(static_cast<double>(*mn));
  // For fixed log k2 the best log k1 is the mean residual; scan log k2.
  auto sse_at = [&](double lk2, double* lk1_out) {
    double mean = 0.0;
    std::vector<double> base(log_q.size());
    for (std::size_t i = 0; i < log_q.size(); ++i) {
      base[i] = inv_n * (std::log(lk2 + log_n[i] - std::log(delta)) - log_n[i]);
      mean += log_q[i] - base[i];
    }
    mean /= static_cast<double>(log_q.size());
    double sse = 0.0;
    for (std::size_t i = 0; i < log_q.size(); ++i) sse += std::pow(log_q[i] - base[i] - mean, 2);
    if (lk1_out != nullptr) *lk1_out = mean;
    return sse;
  };
  const double lo = std::log(delta) - log_nmin + 1e-6;
  const double hi = 40.0;
  constexpr int kGrid = 4000;
  double best_u = lo, best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kGrid; ++i) {
    const double u = lo + (hi - lo) * i / kGrid;
    const double v = sse_at(u, nullptr);
    if (v < best) best = v, best_u = u;
  }
  double a = std::max(lo, best_u - (hi - lo) / kGrid), b = std::min(hi, best_u + (hi - lo) / kGrid);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 100; ++it) {
    const double c = b - phi * (b - a), d = a + phi * (b - a);
    if (sse_at(c, nullptr) < sse_at(d, nullptr)) b = d; else a = c;
  }
  const double u = 0.5 * (a + b);
  double lk1 = 0.0;
  const double sse = sse_at(u, &lk1);
  cal.k1 = std::exp(lk1);
  cal.k2 = std::exp(u);
  cal.r2 = 1.0 - sse / sst;

  std::vector<double> corrected;
  for (std::size_t i = 0; i < log_q.size(); ++i) {
    const double model = lk1 + inv_n * (std::log(u + log_n[i] - std::log(delta)) - log_n[i]);
    cal.residuals.push_back(log_q[i] - model);
    corrected.push_back(log_q[i] - inv_n * std::log(u + log_n[i] - std::log(delta)));
  }
  cal.rate_slope = least_squares(log_n, corrected).slope;

  std::vector<std::size_t> order(sizes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sizes[x] < sizes[y]; });
  for (std::size_t k = order.size(); k-- > 0;) {
    if (std::abs(cal.residuals[order[k]]) > opts.residual_threshold) break;
    cal.n0 = sizes[order[k]];
  }
  return cal;
}

// --- reports --------------------------------------------------------------------

void BoundInputs::validate() const {
  if (l_g) nonneg(*l_g, "l_g");
  nonneg(l_f, "l_f");
  nonneg(h, "h");
  nonneg(eps_bar, "eps_bar");
  nonneg(eps, "eps");
  nonneg(rho, "rho");
  nonneg(l_data, "l_data");
  require(n >= 1, ErrorKind::Argument, "n must be >= 1");
  require(delta > 0.0 && delta < 1.0, ErrorKind::Argument, "delta must lie in (0, 1)");
  require(N >= 1.0, ErrorKind::Argument, "N must be >= 1");
}

BoundReport bound_report(const BoundInputs& in) {
  in.validate();
  BoundReport r;
  r.inputs = in;
  r.l_g_is_proxy = !in.l_g.has_value();
  r.l_g_used = in.l_g.value_or(in.l_data);
  r.uniform = uniform_bound(in.l_f, r.l_g_used, in.h, in.eps_bar, in.eps);
  r.thm1 = thm1_bound(r.l_g_used, in.h, in.eps);
  r.thm2 = thm2_bound(r.l_g_used, in.rho, in.h, in.eps);
  if (in.N >= 2.0 && in.k2 > 0.0 && in.k2 * in.N / in.delta > 1.0) {
    r.thm4 = thm4_bound(r.l_g_used, in.rho, in.eps, in.n, in.N, in.delta, in.k1, in.k2);
  }
  if (r.l_g_is_proxy) {
    r.caveats.push_back("l_g is the data quotient L_data: lower-bound proxy, resulting bound not a certificate");
  }
  r.caveats.push_back("h is a covering-radius estimate from below; the bounds scale with the true h");
  if (in.eps < in.eps_bar) r.caveats.push_back("eps < eps_bar: feasibility of the interpolation problem not guaranteed");
  if (!r.thm4) r.caveats.push_back("probabilistic bound skipped: needs N >= 2 and k2*N/delta > 1");
  return r;
}

nlohmann::json BoundReport::to_json() const {
  const auto& in = inputs;
  nlohmann::json bounds = nlohmann::json::array();
  bounds.push_back({{"name", "uniform"}, {"formula", "(l_f + l_g)*h + eps_bar + eps"}, {"value", uniform}});
  bounds.push_back({{"name", "thm1"}, {"formula", "2*(l_g*h + eps)"}, {"value", thm1}});
  bounds.push_back({{"name", "thm2"}, {"formula", "(2*l_g + rho)*h + 2*eps"}, {"value", thm2}});
  bounds.push_back({{"name", "thm4"},
                    {"formula", "(2*l_g + rho)*k1*(log(k2*N/delta)/N)^(1/n) + 2*eps"},
                    {"value", thm4 ? nlohmann::json(*thm4) : nlohmann::json(nullptr)},
                    {"holds_with_probability_at_least", 1.0 - in.delta}});
  return {{"inputs",
           {{"l_g", in.l_g ? nlohmann::json(*in.l_g) : nlohmann::json(nullptr)},
            {"l_data", in.l_data},
            {"l_f", in.l_f},
            {"h", in.h},
            {"eps_bar", in.eps_bar},
            {"eps", in.eps},
            {"rho", in.rho},
            {"n", in.n},
            {"N", in.N},
            {"delta", in.delta},
            {"k1", in.k1},
            {"k2", in.k2}}},
          {"l_g_used", l_g_used},
          {"l_g_is_proxy", l_g_is_proxy},
          {"h_is_lower_estimate", h_is_lower_estimate},
          {"bounds", bounds},
          {"caveats", caveats}};
}

}  // namespace lipfit
