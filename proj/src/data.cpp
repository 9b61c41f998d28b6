#include "lipfit/data.hpp"

#include "lipfit/error.hpp"
#include "lipfit/kdtree.hpp"
#include "lipfit/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace lipfit {

BatchFn batched(PointFn f) {
  return [f = std::move(f)](const Tensor& points) {
    Tensor out;
    for (Index i = 0; i < points.rows(); ++i) {
      const Vector y = f(points.row(i).transpose());
      if (i == 0) out.resize(points.rows(), y.size());
      out.row(i) = y.transpose();
    }
    return out;
  };
}

Domain::Domain(std::vector<double> lower, std::vector<double> upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  require(!lower_.empty(), ErrorKind::Domain, "domain must have dimension >= 1");
  require(lower_.size() == upper_.size(), ErrorKind::Domain, "domain bounds differ in length");
  for (std::size_t i = 0; i < lower_.size(); ++i) {
    require(std::isfinite(lower_[i]) && std::isfinite(upper_[i]), ErrorKind::Domain, "domain bounds must be finite");
    require(lower_[i] < upper_[i], ErrorKind::Domain,
            "domain axis " + std::to_string(i) + ": lower must be < upper");
  }
}

double Domain::diameter() const {
  double s = 0.0;
  for (Index i = 0; i < dim(); ++i) s += width(i) * width(i);
  return std::sqrt(s);
}

bool Domain::contains(const double* x) const {
  for (Index i = 0; i < dim(); ++i) {
    if (!(x[i] >= lower_[i] && x[i] <= upper_[i])) return false;
  }
  return true;
}

bool Domain::contains_rows(const Tensor& points) const {
  if (points.cols() != dim()) return false;
  for (Index r = 0; r < points.rows(); ++r) {
    if (!contains(points.row(r).data())) return false;
  }
  return true;
}

Domain Domain::unit_cube(Index n) {
  return Domain(std::vector<double>(static_cast<std::size_t>(n), 0.0), std::vector<double>(static_cast<std::size_t>(n), 1.0));
}

void LabeledDataset::validate() const {
  require(inputs.rows() >= 1, ErrorKind::Argument, "dataset must contain at least one sample");
  require(inputs.rows() == outputs.rows(), ErrorKind::Dimension, "dataset input/output row counts differ");
  require(inputs.cols() >= 1 && outputs.cols() >= 1, ErrorKind::Dimension, "dataset dimensions must be >= 1");
  require(inputs.allFinite() && outputs.allFinite(), ErrorKind::Numeric, "dataset contains non-finite values");
  require(noise_bound >= 0.0 && std::isfinite(noise_bound), ErrorKind::Argument, "noise bound must be >= 0");
}

LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b) {
  require(a.input_dim() == b.input_dim() && a.output_dim() == b.output_dim(), ErrorKind::Dimension,
          "concat: dataset dimensions differ");
  LabeledDataset out;
  out.inputs.resize(a.size() + b.size(), a.input_dim());
  out.inputs << a.inputs, b.inputs;
  out.outputs.resize(a.size() + b.size(), a.output_dim());
  out.outputs << a.outputs, b.outputs;
  out.noise_bound = std::max(a.noise_bound, b.noise_bound);
  return out;
}

Tensor sample_uniform(const Domain& domain, Index count, std::uint64_t seed) {
  require(count >= 1, ErrorKind::Argument, "sample_uniform: count must be >= 1");
  Rng rng(seed);
  Tensor pts(count, domain.dim());
  for (Index i = 0; i < count; ++i) {
    for (Index d = 0; d < domain.dim(); ++d) pts(i, d) = rng.uniform(domain.lower()[d], domain.upper()[d]);
  }
  return pts;
}

Tensor sample_grid(const Domain& domain, Index per_dim) {
  require(per_dim >= 2, ErrorKind::Argument, "sample_grid: per_dim must be >= 2");
  const Index n = domain.dim();
  Index total = 1;
  for (Index d = 0; d < n; ++d) total *= per_dim;
  Tensor pts(total, n);
  std::vector<Index> idx(static_cast<std::size_t>(n), 0);
  for (Index r = 0; r < total; ++r) {
    for (Index d = 0; d < n; ++d) {
      const double t = static_cast<double>(idx[d]) / static_cast<double>(per_dim - 1);
      pts(r, d) = idx[d] == per_dim - 1 ? domain.upper()[d] : domain.lower()[d] + t * domain.width(d);
    }
    // Last axis varies fastest.
    for (Index d = n; d-- > 0;) {
      if (++idx[d] < per_dim) break;
      idx[d] = 0;
    }
  }
  return pts;
}

LabeledDataset make_dataset(const BatchFn& g, const Tensor& points, double noise_bound, std::uint64_t seed) {
  require(noise_bound >= 0.0, ErrorKind::Argument, "make_dataset: noise bound must be >= 0");
  require(points.rows() >= 1, ErrorKind::Argument, "make_dataset: no points");
  LabeledDataset ds;
  ds.inputs = points;
  ds.outputs = g(points);
  ds.noise_bound = noise_bound;
  require(ds.outputs.rows() == points.rows(), ErrorKind::Dimension, "make_dataset: generator returned wrong row count");
  for (Index i = 0; i < ds.outputs.rows(); ++i) {
    if (!ds.outputs.row(i).allFinite()) {
      std::ostringstream msg;
      msg << "make_dataset: generator returned a non-finite value at point " << i << " (" << points.row(i) << ")";
      fail(ErrorKind::Numeric, msg.str());
    }
  }
  if (noise_bound > 0.0) {
    Rng rng(seed);
    const Index m = ds.outputs.cols();
    for (Index i = 0; i < ds.outputs.rows(); ++i) {
      Vector dir(m);
      for (Index j = 0; j < m; ++j) dir(j) = rng.normal();
      const double nrm = dir.norm();
      const double radius = noise_bound * std::pow(rng.uniform(), 1.0 / static_cast<double>(m));
      if (nrm > 0.0) ds.outputs.row(i) += (radius / nrm) * dir.transpose();
    }
  }
  return ds;
}

namespace {

template <typename Quotient>
void scan_pairs(const LabeledDataset& ds, Quotient&& on_pair) {
  const Index n = ds.size();
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double dx = (ds.inputs.row(i) - ds.inputs.row(j)).norm();
      if (dx == 0.0) {
        if (ds.outputs.row(i) != ds.outputs.row(j)) {
          fail(ErrorKind::InfeasibleData, "duplicate input rows " + std::to_string(i) + " and " + std::to_string(j) +
                                              " carry different outputs");
        }
        continue;
      }
      on_pair(i, j, dx);
    }
  }
}

}  // namespace

double empirical_lipschitz_lower(const LabeledDataset& ds) {
  ds.validate();
  require(ds.size() >= 2, ErrorKind::Argument, "empirical_lipschitz_lower: need at least two samples");
  double best = 0.0;
  scan_pairs(ds, [&](Index i, Index j, double dx) {
    best = std::max(best, (ds.outputs.row(i) - ds.outputs.row(j)).norm() / dx);
  });
  return best;
}

std::vector<double> empirical_lipschitz_lower_per_output(const LabeledDataset& ds) {
  ds.validate();
  require(ds.size() >= 2, ErrorKind::Argument, "empirical_lipschitz_lower: need at least two samples");
  std::vector<double> best(static_cast<std::size_t>(ds.output_dim()), 0.0);
  scan_pairs(ds, [&](Index i, Index j, double dx) {
    for (Index k = 0; k < ds.output_dim(); ++k) {
      best[k] = std::max(best[k], std::abs(ds.outputs(i, k) - ds.outputs(j, k)) / dx);
    }
  });
  return best;
}

std::string to_string(CoveringMode m) { return m == CoveringMode::ExactGrid ? "exact-grid" : "monte-carlo"; }

namespace {

double refine_probe(const KdTree& tree, const Domain& domain, std::vector<double> x, std::vector<double> step,
                    double value, int iters) {
  const Index n = domain.dim();
  std::vector<double> trial(x.size());
  for (int it = 0; it < iters; ++it) {
    double best = value;
    std::vector<double> best_x;
    for (Index d = 0; d < n; ++d) {
      for (double sign : {1.0, -1.0}) {
        trial = x;
        trial[d] = std::clamp(x[d] + sign * step[d], domain.lower()[d], domain.upper()[d]);
        const double v = tree.nearest(trial.data());
        if (v > best) {
          best = v;
          best_x = trial;
        }
      }
    }
    if (best_x.empty()) {
      for (double& s : step) s *= 0.5;
    } else {
      x = std::move(best_x);
      value = best;
    }
  }
  return value;
}

}  // namespace

CoveringEstimate covering_radius(const Tensor& points, const Domain& domain, CoveringMode mode, Index resolution,
                                 std::uint64_t seed, const CoveringOptions& opts) {
  require(points.rows() >= 1, ErrorKind::Argument, "covering_radius: need at least one point");
  require(points.cols() == domain.dim(), ErrorKind::Dimension, "covering_radius: point dimension mismatch");
  require(resolution >= 1, ErrorKind::Argument, "covering_radius: resolution must be >= 1");
  const KdTree tree(points);
  const Index n = domain.dim();
  CoveringEstimate est;
  est.mode = mode;
  est.resolution = resolution;

  std::vector<double> q(static_cast<std::size_t>(n));
  if (mode == CoveringMode::MonteCarlo) {
    Rng rng(seed);
    for (Index p = 0; p < resolution; ++p) {
      for (Index d = 0; d < n; ++d) q[d] = rng.uniform(domain.lower()[d], domain.upper()[d]);
      est.radius = std::max(est.radius, tree.nearest(q.data()));
    }
    est.probes = resolution;
    return est;
  }

  // Grid over the closed box; a single probe sits at the centre.
  std::vector<Index> idx(static_cast<std::size_t>(n), 0);
  Index total = 1;
  for (Index d = 0; d < n; ++d) total *= resolution;
  struct Candidate {
    double value;
    Index flat;
  };
  std::vector<Candidate> top;
  const Index keep = std::max<Index>(0, opts.refine_top);
  auto coord = [&](Index d, Index i) {
    if (resolution == 1) return 0.5 * (domain.lower()[d] + domain.upper()[d]);
    if (i == resolution - 1) return domain.upper()[d];
    return domain.lower()[d] + domain.width(d) * static_cast<double>(i) / static_cast<double>(resolution - 1);
  };
  for (Index flat = 0; flat < total; ++flat) {
    for (Index d = 0; d < n; ++d) q[d] = coord(d, idx[d]);
    const double v = tree.nearest(q.data());
    est.radius = std::max(est.radius, v);
    if (keep > 0) {
      if (static_cast<Index>(top.size()) < keep) {
        top.push_back({v, flat});
        std::push_heap(top.begin(), top.end(), [](const Candidate& a, const Candidate& b) { return a.value > b.value; });
      } else if (v > top.front().value) {
        std::pop_heap(top.begin(), top.end(), [](const Candidate& a, const Candidate& b) { return a.value > b.value; });
        top.back() = {v, flat};
        std::push_heap(top.begin(), top.end(), [](const Candidate& a, const Candidate& b) { return a.value > b.value; });
      }
    }
    for (Index d = n; d-- > 0;) {
      if (++idx[d] < resolution) break;
      idx[d] = 0;
    }
  }
  est.probes = total;

  if (!top.empty()) {
    std::vector<double> step(static_cast<std::size_t>(n));
    for (Index d = 0; d < n; ++d) {
      step[d] = resolution > 1 ? 0.5 * domain.width(d) / static_cast<double>(resolution - 1) : 0.25 * domain.width(d);
    }
    for (const Candidate& c : top) {
      Index rem = c.flat;
      std::vector<double> x(static_cast<std::size_t>(n));
      for (Index d = n; d-- > 0;) {
        x[d] = coord(d, rem % resolution);
        rem /= resolution;
      }
      est.radius = std::max(est.radius, refine_probe(tree, domain, std::move(x), step, c.value, opts.refine_iters));
    }
  }
  return est;
}

double training_loss_sup(const LabeledDataset& ds, const BatchFn& f) {
  ds.validate();
  const Tensor pred = f(ds.inputs);
  require(pred.rows() == ds.outputs.rows() && pred.cols() == ds.outputs.cols(), ErrorKind::Dimension,
          "training_loss_sup: model output shape " + shape_string(pred) + " vs " + shape_string(ds.outputs));
  require(pred.allFinite(), ErrorKind::Numeric, "training_loss_sup: non-finite model output");
  double worst = 0.0;
  for (Index i = 0; i < ds.size(); ++i) worst = std::max(worst, (ds.outputs.row(i) - pred.row(i)).norm());
  return worst;
}

SupLossEstimate loss_on_points(const BatchFn& f, const BatchFn& g, const Tensor& points) {
  const Tensor fv = f(points);
  const Tensor gv = g(points);
  require(fv.rows() == gv.rows() && fv.cols() == gv.cols(), ErrorKind::Dimension,
          "loss: output shapes differ " + shape_string(fv) + " vs " + shape_string(gv));
  require(fv.allFinite() && gv.allFinite(), ErrorKind::Numeric, "loss: non-finite output");
  SupLossEstimate est;
  est.probes = points.rows();
  double acc = 0.0;
  for (Index i = 0; i < points.rows(); ++i) {
    const double d2 = (fv.row(i) - gv.row(i)).squaredNorm();
    acc += d2;
    est.sup = std::max(est.sup, std::sqrt(d2));
  }
  est.mse = points.rows() > 0 ? acc / static_cast<double>(points.rows()) : 0.0;
  return est;
}

SupLossEstimate sup_loss_estimate(const BatchFn& f, const BatchFn& g, const Domain& domain, Index probes,
                                  std::uint64_t seed) {
  require(probes >= 1, ErrorKind::Argument, "sup_loss_estimate: probes must be >= 1");
  return loss_on_points(f, g, sample_uniform(domain, probes, seed));
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_dataset_csv(const LabeledDataset& ds, const std::filesystem::path& path) {
  ds.validate();
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << ds.input_dim() << ',' << ds.output_dim() << ',' << format_double(ds.noise_bound) << '\n';
  for (Index i = 0; i < ds.size(); ++i) {
    for (Index j = 0; j < ds.input_dim(); ++j) out << (j ? "," : "") << format_double(ds.inputs(i, j));
    for (Index j = 0; j < ds.output_dim(); ++j) out << ',' << format_double(ds.outputs(i, j));
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

namespace {

std::vector<double> parse_row(const std::string& line, const std::filesystem::path& path, std::size_t lineno) {
  std::vector<double> vals;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p <= end) {
    const char* comma = std::find(p, end, ',');
    double v = 0.0;
    const char* s = p;
    while (s < comma && *s == ' ') ++s;
    auto res = std::from_chars(s, comma, v);
    if (res.ec != std::errc() ) {
      fail(ErrorKind::Config, path.string() + ":" + std::to_string(lineno) + ": cannot parse number");
    }
    vals.push_back(v);
    if (comma == end) break;
    p = comma + 1;
  }
  return vals;
}

}  // namespace

LabeledDataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Config, path.string() + ":1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = parse_row(line, path, 1);
  require(header.size() == 3, ErrorKind::Config, path.string() + ":1: header must be n,m,noise_bound");
  const auto n = static_cast<Index>(header[0]);
  const auto m = static_cast<Index>(header[1]);
  require(n >= 1 && m >= 1 && static_cast<double>(n) == header[0] && static_cast<double>(m) == header[1],
          ErrorKind::Config, path.string() + ":1: n and m must be positive integers");
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto r = parse_row(line, path, lineno);
    require(static_cast<Index>(r.size()) == n + m, ErrorKind::Config,
            path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(n + m) + " values");
    rows.push_back(std::move(r));
  }
  LabeledDataset ds;
  ds.noise_bound = header[2];
  ds.inputs.resize(static_cast<Index>(rows.size()), n);
  ds.outputs.resize(static_cast<Index>(rows.size()), m);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Index j = 0; j < n; ++j) ds.inputs(static_cast<Index>(i), j) = rows[i][j];
    for (Index j = 0; j < m; ++j) ds.outputs(static_cast<Index>(i), j) = rows[i][n + j];
  }
  ds.validate();
  return ds;
}

}  // namespace lipfit
