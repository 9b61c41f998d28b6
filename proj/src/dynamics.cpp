#include "lipfit/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace lipfit {

Vector benchmark_field(const Vector& x) {
  require(x.size() == 3, ErrorKind::Dimension, "benchmark field is 3-dimensional");
  Vector dx(3);
  dx(0) = -x(0) + x(2);
  dx(1) = 0.5 * x(0) * x(0) - x(0) * x(2) + x(2) - x(1);
  dx(2) = -x(0) - x(2);
  return dx;
}

VectorField benchmark_vector_field() {
  BatchFn rhs = [](const Tensor& x) {
    require(x.cols() == 3, ErrorKind::Dimension, "benchmark field is 3-dimensional");
    Tensor dx(x.rows(), 3);
    const auto x1 = x.col(0).array();
    const auto x2 = x.col(1).array();
    const auto x3 = x.col(2).array();
    dx.col(0) = -x1 + x3;
    dx.col(1) = 0.5 * x1 * x1 - x1 * x3 + x3 - x2;
    dx.col(2) = -x1 - x3;
    return dx;
  };
  return {3, std::move(rhs), "benchmark"};
}

VectorField make_field(Index dim, BatchFn rhs, std::string name) {
  require(dim >= 1, ErrorKind::Dimension, "vector field dimension must be >= 1");
  return {dim, std::move(rhs), std::move(name)};
}

bool Trajectory::exited_domain() const {
  return std::any_of(exit_time.begin(), exit_time.end(), [](const auto& t) { return t.has_value(); });
}

Tensor Trajectory::path(Index b) const {
  require(b >= 0 && b < batch(), ErrorKind::Argument, "trajectory index out of range");
  Tensor out(static_cast<Index>(states.size()), states.front().cols());
  for (std::size_t k = 0; k < states.size(); ++k) out.row(static_cast<Index>(k)) = states[k].row(b);
  return out;
}

Trajectory integrate(const VectorField& field, const Tensor& x0, double dt, double horizon, const Domain* domain) {
  require(dt > 0.0 && std::isfinite(dt), ErrorKind::Argument, "integrate: dt must be positive");
  require(horizon >= dt, ErrorKind::Argument, "integrate: horizon must be >= dt");
  require(x0.cols() == field.dim && x0.rows() >= 1, ErrorKind::Dimension, "integrate: initial state dimension mismatch");
  require(x0.allFinite(), ErrorKind::Numeric, "integrate: non-finite initial state");
  if (domain != nullptr) require(domain->dim() == field.dim, ErrorKind::Dimension, "integrate: domain dimension mismatch");

  const long steps = std::lround(horizon / dt);
  Trajectory traj;
  traj.dt = dt;
  traj.times.reserve(static_cast<std::size_t>(steps + 1));
  traj.states.reserve(static_cast<std::size_t>(steps + 1));
  traj.exit_time.assign(static_cast<std::size_t>(x0.rows()), std::nullopt);

  auto monitor = [&](const Tensor& x, double t) {
    if (domain == nullptr) return;
    for (Index b = 0; b < x.rows(); ++b) {
      if (!traj.exit_time[b] && !domain->contains(x.row(b).data())) traj.exit_time[b] = t;
    }
  };

  Tensor x = x0;
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  monitor(x, 0.0);
  for (long k = 1; k <= steps; ++k) {
    const Tensor k1 = field.rhs(x);
    const Tensor k2 = field.rhs(x + 0.5 * dt * k1);
    const Tensor k3 = field.rhs(x + 0.5 * dt * k2);
    const Tensor k4 = field.rhs(x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double t = static_cast<double>(k) * dt;
    if (!x.allFinite()) {
      throw BlowUpError(field.name + ": non-finite state at t = " + format_double(t), std::move(traj));
    }
    traj.times.push_back(t);
    traj.states.push_back(x);
    monitor(x, t);
  }
  return traj;
}

Trajectory integrate(const VectorField& field, const Vector& x0, double dt, double horizon, const Domain* domain) {
  return integrate(field, Tensor(x0.transpose()), dt, horizon, domain);
}

TrajectoryError trajectory_error(const VectorField& f, const VectorField& g, const Tensor& x0, double dt,
                                 double horizon, const Domain* domain) {
  require(f.dim == g.dim, ErrorKind::Dimension, "trajectory_error: fields differ in dimension");
  const Trajectory tf = integrate(f, x0, dt, horizon, domain);
  const Trajectory tg = integrate(g, x0, dt, horizon, nullptr);
  TrajectoryError err;
  err.times = tf.times;
  err.learned_exited = tf.exited_domain();
  err.mse.reserve(tf.states.size());
  for (std::size_t k = 0; k < tf.states.size(); ++k) {
    const Eigen::VectorXd d2 = (tf.states[k] - tg.states[k]).rowwise().squaredNorm();
    // Fixed summation order over initial conditions.
    double s = 0.0;
    for (Index b = 0; b < d2.size(); ++b) s += d2(b);
    err.mse.push_back(s / static_cast<double>(d2.size()));
    err.sup_error = std::max(err.sup_error, std::sqrt(d2.maxCoeff()));
  }
  return err;
}

double simulation_error_bound(const std::function<double(double)>& gamma, double fit_bound) {
  require(fit_bound >= 0.0 && std::isfinite(fit_bound), ErrorKind::Argument, "fit bound must be finite and >= 0");
  require(gamma(0.0) == 0.0, ErrorKind::Contract, "gain function must satisfy gamma(0) = 0");
  const double top = fit_bound > 0.0 ? 2.0 * fit_bound : 1.0;
  constexpr int kProbes = 256;
  double prev = 0.0;
  for (int i = 1; i <= kProbes; ++i) {
    const double s = top * static_cast<double>(i) / kProbes;
    const double v = gamma(s);
    require(std::isfinite(v), ErrorKind::Contract, "gain function is not finite at " + format_double(s));
    require(v >= prev, ErrorKind::Contract, "gain function decreases near " + format_double(s));
    prev = v;
  }
  return gamma(fit_bound);
}

void write_trajectory_csv(const Trajectory& traj, Index b, const std::filesystem::path& path) {
  const Tensor p = traj.path(b);
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << 't';
  for (Index j = 0; j < p.cols(); ++j) out << ",x" << j + 1;
  out << '\n';
  for (Index k = 0; k < p.rows(); ++k) {
    out << format_double(traj.times[k]);
    for (Index j = 0; j < p.cols(); ++j) out << ',' << format_double(p(k, j));
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

void write_error_curve_csv(const TrajectoryError& err, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << "t,mse\n";
  for (std::size_t k = 0; k < err.times.size(); ++k) {
    out << format_double(err.times[k]) << ',' << format_double(err.mse[k]) << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_curves_svg(const std::vector<Curve>& curves, const std::string& title, const std::string& y_label,
                      const std::filesystem::path& path) {
  constexpr double kW = 720, kH = 440, kL = 80, kR = 160, kT = 40, kB = 50;
  constexpr double kFloor = 1e-12;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const Curve& c : curves) {
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      if (!std::isfinite(c.y[i])) continue;
      x0 = std::min(x0, c.x[i]);
      x1 = std::max(x1, c.x[i]);
      const double ly = std::log10(std::max(c.y[i], kFloor));
      y0 = std::min(y0, ly);
      y1 = std::max(y1, ly);
    }
  }
  if (!(x1 > x0)) x0 = 0.0, x1 = 1.0;
  if (!(y1 > y0)) y0 = -1.0, y1 = 1.0;
  y0 = std::floor(y0);
  y1 = std::ceil(y1);
  if (y1 == y0) y1 = y0 + 1.0;

  auto px = [&](double x) { return kL + (x - x0) / (x1 - x0) * (kW - kL - kR); };
  auto py = [&](double ly) { return kH - kB - (ly - y0) / (y1 - y0) * (kH - kT - kB); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(title)
    << "</text>\n";
  s << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\"" << kH - kB
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kH - kB << "\" stroke=\"black\"/>\n";
  for (int e = static_cast<int>(y0); e <= static_cast<int>(y1); ++e) {
    s << "<line x1=\"" << kL - 4 << "\" y1=\"" << py(e) << "\" x2=\"" << kW - kR << "\" y2=\"" << py(e)
      << "\" stroke=\"#ddd\"/>\n";
    s << "<text x=\"" << kL - 8 << "\" y=\"" << py(e) + 4 << "\" text-anchor=\"end\" font-size=\"11\">1e" << e
      << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double x = x0 + (x1 - x0) * i / 5.0;
    s << "<text x=\"" << px(x) << "\" y=\"" << kH - kB + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
      << format_double(std::round(x * 100.0) / 100.0) << "</text>\n";
  }
  s << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\" font-size=\"12\">t [s]</text>\n";
  s << "<text x=\"18\" y=\"" << (kT + kH - kB) / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 18 "
    << (kT + kH - kB) / 2 << ")\">" << escape_xml(y_label) << "</text>\n";

  for (std::size_t c = 0; c < curves.size(); ++c) {
    const Curve& cv = curves[c];
    const char* color = kColors[c % std::size(kColors)];
    s << "<polyline class=\"curve\" data-label=\"" << escape_xml(cv.label) << "\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < cv.x.size(); ++i) {
      if (!std::isfinite(cv.y[i])) break;
      s << px(cv.x[i]) << ',' << py(std::log10(std::max(cv.y[i], kFloor))) << ' ';
    }
    s << "\"/>\n";
    const double ly = kT + 18.0 * static_cast<double>(c + 1);
    s << "<line x1=\"" << kW - kR + 12 << "\" y1=\"" << ly << "\" x2=\"" << kW - kR + 36 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << kW - kR + 42 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">" << escape_xml(cv.label)
      << "</text>\n";
  }
  s << "</svg>\n";

  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << s.str();
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace lipfit
