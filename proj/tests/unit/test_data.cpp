#include "doctest.h"

#include "lipfit/data.hpp"
#include "lipfit/dynamics.hpp"
#include "lipfit/error.hpp"
#include "lipfit/kdtree.hpp"
#include "lipfit/rng.hpp"

#include <filesystem>
#include <fstream>

using namespace lipfit;
namespace fs = std::filesystem;

namespace {

LabeledDataset line_data(std::initializer_list<std::pair<double, double>> pts) {
  LabeledDataset ds;
  ds.inputs.resize(static_cast<Index>(pts.size()), 1);
  ds.outputs.resize(static_cast<Index>(pts.size()), 1);
  Index i = 0;
  for (auto [x, y] : pts) {
    ds.inputs(i, 0) = x;
    ds.outputs(i, 0) = y;
    ++i;
  }
  return ds;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lipfit_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("rng streams are reproducible") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42);
  Rng f1 = c.fork(1), f2 = Rng(42).fork(1), f3 = Rng(42).fork(2);
  const double x = f1.uniform();
  CHECK(x == f2.uniform());
  CHECK(x != f3.uniform());
}

TEST_CASE("domain validation") {
  CHECK_THROWS_AS(Domain({0.0}, {0.0}), Error);
  CHECK_THROWS_AS(Domain({0.0, 1.0}, {1.0}), Error);
  CHECK_THROWS_AS(Domain({}, {}), Error);
  try {
    Domain({1.0}, {0.0});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Domain);
  }
  const Domain d({-1.0, 0.0}, {1.0, 2.0});
  CHECK(d.diameter() == doctest::Approx(std::sqrt(8.0)));
}

TEST_CASE("uniform samples") {
  const Domain unit({0.0}, {1.0});
  const Tensor a = sample_uniform(unit, 4, 9), b = sample_uniform(unit, 4, 9);
  CHECK(a == b);
  CHECK(a.minCoeff() >= 0.0);
  CHECK(a.maxCoeff() <= 1.0);
  const Tensor big = sample_uniform(unit, 100000, 1);
  CHECK(std::abs(big.mean() - 0.5) <= 0.01);
}

TEST_CASE("grid samples") {
  const Domain cube({-2.0, -10.0, -2.0}, {2.0, 10.0, 2.0});
  CHECK(sample_grid(cube, 3).rows() == 27);

  const Tensor ends = sample_grid(Domain({0.0}, {1.0}), 2);
  CHECK(ends(0, 0) == 0.0);
  CHECK(ends(1, 0) == 1.0);

  const Tensor sq = sample_grid(Domain::unit_cube(2), 3);
  bool has_mid = false;
  for (Index i = 0; i < sq.rows(); ++i) has_mid = has_mid || (sq(i, 0) == 0.5 && sq(i, 1) == 0.5);
  CHECK(has_mid);
  CHECK(cube.contains_rows(sample_grid(cube, 5)));
}

TEST_CASE("make_dataset noise") {
  const BatchFn g = benchmark_vector_field().rhs;
  const Tensor pts = sample_uniform(Domain::unit_cube(3), 200, 3);
  const LabeledDataset clean = make_dataset(g, pts, 0.0, 1);
  CHECK(clean.outputs == g(pts));
  const LabeledDataset noisy = make_dataset(g, pts, 0.1, 1);
  CHECK(noisy.noise_bound == 0.1);
  const Tensor diff = noisy.outputs - g(pts);
  CHECK(diff.rowwise().norm().maxCoeff() <= 0.1);
  CHECK(diff.rowwise().norm().maxCoeff() > 0.05);
  CHECK(make_dataset(g, pts, 0.1, 1).outputs == noisy.outputs);
}

TEST_CASE("make_dataset rejects non-finite generator values") {
  const BatchFn bad = [](const Tensor& x) {
    Tensor y = x;
    y(0, 0) = std::numeric_limits<double>::infinity();
    return y;
  };
  try {
    make_dataset(bad, Tensor::Ones(3, 2), 0.0, 0);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
  }
}

TEST_CASE("data Lipschitz quotient") {
  CHECK(empirical_lipschitz_lower(line_data({{0, 0}, {1, 2}})) == 2.0);
  CHECK(empirical_lipschitz_lower(line_data({{0, 0}, {1, 1}, {2, 2}})) == 1.0);
  try {
    empirical_lipschitz_lower(line_data({{0, 0}, {0, 1}}));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InfeasibleData);
  }
  // Identical duplicates are harmless.
  CHECK(empirical_lipschitz_lower(line_data({{0, 0}, {0, 0}, {1, 3}})) == 3.0);
}

TEST_CASE("data Lipschitz quotient matches a brute-force scan") {
  const Domain dom({-2.0, -10.0, -2.0}, {2.0, 10.0, 2.0});
  const LabeledDataset ds = make_dataset(benchmark_vector_field().rhs, sample_uniform(dom, 150, 8), 0.0, 0);
  double best = 0.0;
  for (Index i = 0; i < ds.size(); ++i)
    for (Index j = 0; j < ds.size(); ++j)
      if (i != j)
        best = std::max(best, (ds.outputs.row(i) - ds.outputs.row(j)).norm() /
                                  (ds.inputs.row(i) - ds.inputs.row(j)).norm());
  CHECK(empirical_lipschitz_lower(ds) == best);
  const auto per = empirical_lipschitz_lower_per_output(ds);
  CHECK(per.size() == 3);
  for (double l : per) CHECK(l <= best + 1e-12);
}

TEST_CASE("covering radius examples") {
  Tensor centre(1, 2);
  centre << 0.5, 0.5;
  const auto est = covering_radius(centre, Domain::unit_cube(2), CoveringMode::ExactGrid, 101, 0);
  CHECK(est.radius == doctest::Approx(std::sqrt(0.5)).epsilon(1e-2));
  CHECK(est.lower_bound);
  CHECK(est.probes == 101 * 101);

  const Tensor grid = sample_grid(Domain::unit_cube(1), 11);
  CHECK(covering_radius(grid, Domain::unit_cube(1), CoveringMode::ExactGrid, 1001, 0).radius ==
        doctest::Approx(0.05).epsilon(1e-9));

  const auto mc = covering_radius(centre, Domain::unit_cube(2), CoveringMode::MonteCarlo, 5000, 3);
  CHECK(mc.radius <= std::sqrt(0.5) + 1e-12);
  CHECK(mc.radius > 0.6);
}

TEST_CASE("covering radius never grows when a point is added") {
  Rng rng(17);
  const Domain dom = Domain::unit_cube(2);
  for (int t = 0; t < 100; ++t) {
    const Tensor pts = sample_uniform(dom, 1 + static_cast<Index>(rng.uniform() * 10), rng.next_u64());
    Tensor more(pts.rows() + 1, 2);
    more << pts, sample_uniform(dom, 1, rng.next_u64());
    const double h0 = covering_radius(pts, dom, CoveringMode::ExactGrid, 33, 0).radius;
    const double h1 = covering_radius(more, dom, CoveringMode::ExactGrid, 33, 0).radius;
    CHECK(h1 <= h0);
  }
}

TEST_CASE("covering radius estimates rise toward the truth on nested grids") {
  // Resolutions 2^k + 1 nest, so each probe set contains the previous one.
  const Tensor pts = sample_uniform(Domain::unit_cube(2), 12, 5);
  double prev = 0.0;
  for (Index r : {5, 9, 17, 33, 65, 129}) {
    const double h = covering_radius(pts, Domain::unit_cube(2), CoveringMode::ExactGrid, r, 0).radius;
    CHECK(h >= prev);
    prev = h;
  }
  CoveringOptions refine;
  refine.refine_top = 16;
  const double refined = covering_radius(pts, Domain::unit_cube(2), CoveringMode::ExactGrid, 33, 0, refine).radius;
  CHECK(refined >= covering_radius(pts, Domain::unit_cube(2), CoveringMode::ExactGrid, 33, 0).radius);
  CHECK(refined <= std::sqrt(2.0));
}

TEST_CASE("k-d tree nearest distance matches a linear scan") {
  Rng rng(2);
  const Tensor pts = sample_uniform(Domain::unit_cube(3), 500, 4);
  const KdTree tree(pts, 4);
  for (int q = 0; q < 200; ++q) {
    double x[3] = {rng.uniform(), rng.uniform(), rng.uniform()};
    double best = 1e300;
    for (Index i = 0; i < pts.rows(); ++i) {
      double s = 0;
      for (int d = 0; d < 3; ++d) s += (pts(i, d) - x[d]) * (pts(i, d) - x[d]);
      best = std::min(best, s);
    }
    CHECK(tree.nearest_squared(x) == best);
  }
}

TEST_CASE("sup training loss") {
  const LabeledDataset ds = line_data({{0, 0}, {1, 1}});
  CHECK(training_loss_sup(ds, [](const Tensor& x) { return x; }) == 0.0);
  CHECK(training_loss_sup(ds, [](const Tensor& x) { return Tensor::Zero(x.rows(), 1).eval(); }) == 1.0);

  Rng rng(6);
  LabeledDataset r;
  r.inputs = sample_uniform(Domain::unit_cube(2), 50, 1);
  r.outputs = sample_uniform(Domain::unit_cube(3), 50, 2);
  const BatchFn f = [](const Tensor& x) {
    Tensor y(x.rows(), 3);
    y.col(0) = x.col(0);
    y.col(1) = x.col(1);
    y.col(2) = x.col(0) + x.col(1);
    return y;
  };
  const Tensor pred = f(r.inputs);
  double loop = 0;
  for (Index i = 0; i < 50; ++i) loop = std::max(loop, (r.outputs.row(i) - pred.row(i)).norm());
  CHECK(std::abs(training_loss_sup(r, f) - loop) <= 1e-12);
}

TEST_CASE("sup loss on probes") {
  const Domain dom = Domain::unit_cube(2);
  const BatchFn g = [](const Tensor& x) { return x; };
  CHECK(sup_loss_estimate(g, g, dom, 100, 1).sup == 0.0);
  const BatchFn shifted = [](const Tensor& x) {
    Tensor y = x;
    y.col(0).array() += 3.0;
    y.col(1).array() += 4.0;
    return y;
  };
  for (Index probes : {1, 10, 1000}) {
    const SupLossEstimate s = sup_loss_estimate(shifted, g, dom, probes, 2);
    CHECK(s.sup == doctest::Approx(5.0));
    CHECK(s.mse == doctest::Approx(25.0));
    CHECK(s.probes == probes);
  }
}

TEST_CASE("dataset CSV round-trip") {
  const fs::path dir = temp_dir("csv");
  LabeledDataset ds;
  ds.inputs = sample_uniform(Domain::unit_cube(3), 20, 1);
  ds.outputs = sample_uniform(Domain::unit_cube(2), 20, 2);
  ds.outputs(0, 0) = 1.0 / 3.0;
  ds.noise_bound = 0.125;
  write_dataset_csv(ds, dir / "d.csv");
  const LabeledDataset back = read_dataset_csv(dir / "d.csv");
  CHECK(back.inputs == ds.inputs);
  CHECK(back.outputs == ds.outputs);
  CHECK(back.noise_bound == ds.noise_bound);

  std::ifstream in(dir / "d.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "3,2,0.125");
}

TEST_CASE("dataset CSV errors") {
  const fs::path dir = temp_dir("csv_bad");
  try {
    read_dataset_csv(dir / "missing.csv");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
  std::ofstream(dir / "bad.csv") << "1,1,0\n0.5,abc\n";
  try {
    read_dataset_csv(dir / "bad.csv");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  std::ofstream(dir / "short.csv") << "2,1,0\n0.5,1\n";
  CHECK_THROWS_AS(read_dataset_csv(dir / "short.csv"), Error);
}
