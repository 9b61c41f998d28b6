#pragma once

#include "lipfit/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace lipfit {

// Batched map: rows of `points` (N×n) to rows of the result (N×m).
using BatchFn = std::function<Tensor(const Tensor& points)>;
using PointFn = std::function<Vector(const Vector& x)>;

// Lifts a single-point map to a batched one.
BatchFn batched(PointFn f);

class Domain {
 public:
  Domain(std::vector<double> lower, std::vector<double> upper);

  Index dim() const { return static_cast<Index>(lower_.size()); }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  double width(Index i) const { return upper_[i] - lower_[i]; }
  double diameter() const;
  bool contains(const double* x) const;
  bool contains_rows(const Tensor& points) const;

  static Domain unit_cube(Index n);

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
};

struct LabeledDataset {
  Tensor inputs;   // N×n
  Tensor outputs;  // N×m
  double noise_bound = 0.0;

  Index size() const { return inputs.rows(); }
  Index input_dim() const { return inputs.cols(); }
  Index output_dim() const { return outputs.cols(); }

  // Row counts, N ≥ 1, finiteness, noise_bound ≥ 0.
  void validate() const;
};

LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b);

Tensor sample_uniform(const Domain& domain, Index count, std::uint64_t seed);
Tensor sample_grid(const Domain& domain, Index per_dim);

// y_i = g(x_i) + e_i, e_i uniform in the ball of radius noise_bound.
LabeledDataset make_dataset(const BatchFn& g, const Tensor& points, double noise_bound, std::uint64_t seed);

// max over pairs i<j of |y_i − y_j| / |x_i − x_j|. Exact pairwise scan.
double empirical_lipschitz_lower(const LabeledDataset& ds);
// Same, with the scalar quotient for each output coordinate separately.
std::vector<double> empirical_lipschitz_lower_per_output(const LabeledDataset& ds);

enum class CoveringMode { ExactGrid, MonteCarlo };

std::string to_string(CoveringMode m);

struct CoveringOptions {
  // Grid mode only: the best `refine_top` probes are pushed uphill by a
  // pattern search on the nearest-sample distance. Result stays a lower bound.
  Index refine_top = 0;
  int refine_iters = 40;
};

struct CoveringEstimate {
  double radius = 0.0;
  CoveringMode mode = CoveringMode::ExactGrid;
  Index resolution = 0;
  Index probes = 0;
  // Always true: the sup over a continuum is estimated from below.
  bool lower_bound = true;
};

CoveringEstimate covering_radius(const Tensor& points, const Domain& domain, CoveringMode mode, Index resolution,
                                 std::uint64_t seed, const CoveringOptions& opts = {});

// max_i |y_i − f(x_i)|
double training_loss_sup(const LabeledDataset& ds, const BatchFn& f);

struct SupLossEstimate {
  double sup = 0.0;  // max over probes of |g − f|
  double mse = 0.0;  // mean over probes of |g − f|²
  Index probes = 0;
};

SupLossEstimate sup_loss_estimate(const BatchFn& f, const BatchFn& g, const Domain& domain, Index probes,
                                  std::uint64_t seed);
// Same metrics on caller-supplied probe points.
SupLossEstimate loss_on_points(const BatchFn& f, const BatchFn& g, const Tensor& points);

// CSV: first line "n,m,noise_bound" (values), then one row x_1..x_n,y_1..y_m.
void write_dataset_csv(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset read_dataset_csv(const std::filesystem::path& path);
std::string format_double(double v);

}  // namespace lipfit
