#pragma once

#include "lipfit/data.hpp"
#include "lipfit/error.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace lipfit {

struct VectorField {
  Index dim = 0;
  BatchFn rhs;  // rows are states
  std::string name;
};

// ẋ = [−x1 + x3; x1²/2 − x1 x3 + x3 − x2; −x1 − x3]
Vector benchmark_field(const Vector& x);
VectorField benchmark_vector_field();

// Wraps a batched map with equal input and output width.
VectorField make_field(Index dim, BatchFn rhs, std::string name);

// Batch of trajectories sharing one time grid t_k = k·dt.
struct Trajectory {
  double dt = 0.0;
  std::vector<double> times;
  std::vector<Tensor> states;  // states[k] is B×n at times[k]
  std::vector<std::optional<double>> exit_time;  // first time outside the domain, per trajectory

  Index batch() const { return states.empty() ? 0 : states.front().rows(); }
  bool exited_domain() const;
  // Single trajectory b as a (T+1)×n matrix.
  Tensor path(Index b) const;
};

// Non-finite state; carries the trajectory up to the last finite step.
class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, Trajectory partial)
      : Error(ErrorKind::Numeric, what), partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

// Classic fixed-step RK4 from each row of x0. When a domain is given, the
// first exit of every trajectory is recorded; integration continues.
Trajectory integrate(const VectorField& field, const Tensor& x0, double dt, double horizon,
                     const Domain* domain = nullptr);
Trajectory integrate(const VectorField& field, const Vector& x0, double dt, double horizon,
                     const Domain* domain = nullptr);

struct TrajectoryError {
  std::vector<double> times;
  std::vector<double> mse;  // mean over initial conditions of |x_f − x_g|² at each time
  double sup_error = 0.0;   // max over time and initial conditions of |x_f − x_g|
  bool learned_exited = false;
};

TrajectoryError trajectory_error(const VectorField& f, const VectorField& g, const Tensor& x0, double dt,
                                 double horizon, const Domain* domain = nullptr);

// γ(fit_bound) after probing γ for γ(0) = 0 and monotonicity on [0, 2·fit_bound].
double simulation_error_bound(const std::function<double(double)>& gamma, double fit_bound);

void write_trajectory_csv(const Trajectory& traj, Index b, const std::filesystem::path& path);
void write_error_curve_csv(const TrajectoryError& err, const std::filesystem::path& path);

struct Curve {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Line plot with a log-scale y axis; non-positive values are clipped.
void write_curves_svg(const std::vector<Curve>& curves, const std::string& title, const std::string& y_label,
                      const std::filesystem::path& path);

}  // namespace lipfit
