#include "doctest.h"

#include "lipfit/dynamics.hpp"
#include "lipfit/error.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lipfit;
namespace fs = std::filesystem;

namespace {

Vector pt(std::initializer_list<double> v) {
  Vector x(static_cast<Index>(v.size()));
  Index i = 0;
  for (double c : v) x(i++) = c;
  return x;
}

VectorField linear_decay(double offset = 0.0) {
  return make_field(1, [offset](const Tensor& x) { return (-x.array() + offset).matrix().eval(); }, "decay");
}

double final_error_decay(double dt) {
  const Trajectory t = integrate(linear_decay(), pt({1.0}), dt, 1.0);
  return std::abs(t.states.back()(0, 0) - std::exp(-1.0));
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lipfit_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("benchmark field values") {
  CHECK(benchmark_field(pt({0, 0, 0})).isZero());
  CHECK(benchmark_field(pt({1, 0, 1})) == pt({0, 0.5, -2}));
  CHECK(benchmark_field(pt({2, 10, 2})) == pt({0, -10, -4}));
  const VectorField f = benchmark_vector_field();
  Tensor rows(2, 3);
  rows << 1, 0, 1, 2, 10, 2;
  const Tensor out = f.rhs(rows);
  CHECK(out.row(0).transpose() == pt({0, 0.5, -2}));
  CHECK(out.row(1).transpose() == pt({0, -10, -4}));
}

TEST_CASE("a zero field gives a constant trajectory") {
  const VectorField zero = make_field(2, [](const Tensor& x) { return Tensor::Zero(x.rows(), x.cols()).eval(); }, "0");
  const Trajectory t = integrate(zero, pt({0.3, -1.2}), 0.1, 1.0);
  CHECK(t.states.size() == 11);
  for (const Tensor& s : t.states) CHECK(s.row(0).transpose() == pt({0.3, -1.2}));
}

TEST_CASE("RK4 on exponential decay") {
  CHECK(final_error_decay(0.01) <= 1e-8);
  const double ratio = final_error_decay(0.1) / final_error_decay(0.05);
  CHECK(ratio >= 12.0);
  CHECK(ratio <= 20.0);
}

TEST_CASE("benchmark trajectories decay to the origin") {
  const VectorField f = benchmark_vector_field();
  const Trajectory coarse = integrate(f, pt({1, 1, 1}), 0.01, 10.0);
  const Trajectory fine = integrate(f, pt({1, 1, 1}), 1e-4, 10.0);
  CHECK(coarse.states.back().norm() <= 1e-3);
  CHECK((coarse.states.back() - fine.states.back()).norm() <= 1e-8);
}

TEST_CASE("time grid and step count") {
  const Trajectory t = integrate(linear_decay(), pt({1.0}), 0.01, 10.0);
  CHECK(t.times.size() == 1001);
  CHECK(t.times.back() == doctest::Approx(10.0));
  CHECK(t.path(0).rows() == 1001);
}

TEST_CASE("trajectory error against a constant offset") {
  // e' = -e + c, e(0) = 0  =>  e(t) = c (1 - exp(-t))
  const double c = 0.3;
  Tensor x0(3, 1);
  x0 << 1.0, -0.5, 2.0;
  const TrajectoryError err = trajectory_error(linear_decay(c), linear_decay(), x0, 0.01, 5.0);
  for (std::size_t k = 0; k < err.times.size(); k += 50) {
    const double e = c * (1.0 - std::exp(-err.times[k]));
    CHECK(err.mse[k] == doctest::Approx(e * e).epsilon(1e-8));
  }
  CHECK(err.sup_error == doctest::Approx(c * (1.0 - std::exp(-5.0))).epsilon(1e-8));

  const TrajectoryError none = trajectory_error(linear_decay(), linear_decay(), x0, 0.01, 1.0);
  CHECK(none.sup_error == 0.0);
}

TEST_CASE("domain exits are recorded") {
  const VectorField grow = make_field(1, [](const Tensor& x) { return x; }, "grow");
  const Domain dom({-2.0}, {2.0});
  Tensor x0(2, 1);
  x0 << 1.0, 0.1;
  const Trajectory t = integrate(grow, x0, 0.001, 1.0, &dom);
  CHECK(t.exited_domain());
  REQUIRE(t.exit_time[0].has_value());
  CHECK(*t.exit_time[0] == doctest::Approx(std::log(2.0)).epsilon(1e-2));
  CHECK_FALSE(t.exit_time[1].has_value());
}

TEST_CASE("finite-time blow-up keeps the partial trajectory") {
  const VectorField sq = make_field(1, [](const Tensor& x) { return x.array().square().matrix().eval(); }, "sq");
  try {
    integrate(sq, pt({1.0}), 0.01, 3.0);
    FAIL("expected blow-up");
  } catch (const BlowUpError& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
    CHECK(e.partial().states.size() >= 90);
    CHECK(e.partial().states.back().allFinite());
  }
}

TEST_CASE("simulation error bound") {
  CHECK(simulation_error_bound([](double s) { return s; }, 0.3) == 0.3);
  // l_g = 1, rho = 0.1, h = 0.05, eps = 0.01
  const double fit = (2 * 1.0 + 0.1) * 0.05 + 2 * 0.01;
  CHECK(simulation_error_bound([](double s) { return 2 * s; }, fit) == doctest::Approx(0.25));
  CHECK(simulation_error_bound([](double s) { return s * s; }, 0.0) == 0.0);
  CHECK_THROWS_AS(simulation_error_bound([](double s) { return s + 1; }, 0.1), Error);
  CHECK_THROWS_AS(simulation_error_bound([](double s) { return std::sin(20 * s); }, 1.0), Error);
}

TEST_CASE("trajectory, error curve and plot files") {
  const fs::path dir = temp_dir("dyn");
  Tensor x0(2, 3);
  x0 << 1, 1, 1, -1, 2, 0;
  const Trajectory t = integrate(benchmark_vector_field(), x0, 0.1, 1.0);
  write_trajectory_csv(t, 1, dir / "traj.csv");
  const std::string csv = slurp(dir / "traj.csv");
  CHECK(csv.rfind("t,x1,x2,x3\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 12);

  const TrajectoryError err = trajectory_error(linear_decay(0.1), linear_decay(), x0.col(0), 0.1, 1.0);
  write_error_curve_csv(err, dir / "err.csv");
  CHECK(slurp(dir / "err.csv").rfind("t,mse\n", 0) == 0);

  std::vector<Curve> curves{{"a", {0, 1, 2}, {1e-3, 1e-2, 1e-1}}, {"b&c", {0, 1, 2}, {0.0, 1e-4, 1e-5}}};
  write_curves_svg(curves, "MSE", "mse", dir / "plot.svg");
  const std::string svg = slurp(dir / "plot.svg");
  std::size_t count = 0;
  for (std::size_t pos = 0; (pos = svg.find("class=\"curve\"", pos)) != std::string::npos; ++pos) ++count;
  CHECK(count == 2);
  CHECK(svg.find("b&amp;c") != std::string::npos);
}
