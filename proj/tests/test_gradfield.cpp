#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "mgn/gradfield.hpp"
#include "mgn/io.hpp"

using namespace mgn::gradfield;

TEST_CASE("true gradient") {
  const std::vector<double> o{0, 0}, one{1, 1};
  CHECK(true_gradient(o) == DenseVector{0, 0.5});
  CHECK(true_gradient(one) == DenseVector{4.5, 3.0});

  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double h = 1e-5;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> x{u(gen), u(gen)};
    const DenseVector g = true_gradient(x);
    for (std::size_t k = 0; k < 2; ++k) {
      std::vector<double> xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      CHECK(std::abs((potential(xp) - potential(xm)) / (2 * h) - g[k]) <= 1e-6);
    }
  }
}

TEST_CASE("lattice layout") {
  const DenseMatrix lat = evaluation_lattice();
  REQUIRE(lat.rows() == kLattice * kLattice);
  CHECK(lat(0, 0) == 0.0);
  CHECK(lat(1, 0) == 0.01);
  CHECK(lat(1, 1) == 0.0);
  CHECK(lat(kLattice, 1) == 0.01);
  CHECK(lat(kLattice * kLattice - 1, 0) == 1.0);
  CHECK(lat(kLattice * kLattice - 1, 1) == 1.0);
}

TEST_CASE("zero model error matches an independent lattice mean") {
  const auto zero = testing::zero_cmgn(2, 2, 2);
  const GradFieldResult r = evaluate(zero);
  double acc = 0.0;
  for (int j = 0; j <= 100; ++j)
    for (int i = 0; i <= 100; ++i) {
      const double x1 = i / 100.0, x2 = j / 100.0;
      const double g1 = 4 * x1 * x1 * x1 + x2 / 2, g2 = 0.5 + x1 / 2 + 3 * x2 - x2 * x2;
      acc += g1 * g1 + g2 * g2;
    }
  const double expected = 10 * std::log10(acc / (101.0 * 101.0));
  CHECK(r.mse_db == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(r.mse_db - mse_db_from_grid(r.error_grid)) <= 1e-12);
  for (double e : r.error_grid.span()) CHECK(e >= 0.0);
}

TEST_CASE("an exact model hits the floor") {
  // g(x) = 0 everywhere against itself: zero error grid.
  const DenseMatrix grid(kLattice, kLattice);
  CHECK(mse_db_from_grid(grid) == kFloorDb);
}

TEST_CASE("loop integral") {
  // Affine symmetric fields are gradients.
  mgn::model::MmgnModel m = testing::zero_mmgn(2, {});
  m.V = DenseMatrix{{1, 2}, {0, 1}};
  m.a = DenseVector{0.3, -0.7};
  const LoopIntegral l = loop_integral(m, 10000);
  CHECK(std::abs(l.circulation) <= 1e-12);
  CHECK(l.mean_norm > 0.0);

  mgn::model::ModelSpec spec;
  spec.arch = mgn::model::Architecture::Cmgn;
  spec.n = 5;
  spec.width = 4;
  spec.layers = 3;
  const auto r = testing::randomized(spec, 3);
  const LoopIntegral lr = loop_integral(r, 10000);
  CHECK(std::abs(lr.circulation) <= 1e-6 * lr.mean_norm);
}

TEST_CASE("short training run and exports") {
  mgn::model::ModelSpec spec;
  spec.n = 2;
  spec.width = 2;
  spec.layers = 2;
  GradFieldConfig cfg;
  cfg.samples = 20000;
  cfg.train.epochs = 2;
  cfg.train.batch_size = 128;
  cfg.train.learning_rate = 1e-2;
  const GradFieldResult a = run_gradfield(spec, cfg);
  CHECK(a.param_count == 14);
  CHECK(a.train_report.epoch_losses.size() == 2);
  CHECK(std::abs(a.mse_db - mse_db_from_grid(a.error_grid)) <= 1e-12);
  CHECK(a.mse_db < evaluate(testing::zero_cmgn(2, 2, 2)).mse_db);

  // Pairwise monotonicity of the trained field on the unit square.
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const std::vector<double> x{u(gen), u(gen)}, y{u(gen), u(gen)};
    const DenseVector gx = mgn::model::forward(a.model, x), gy = mgn::model::forward(a.model, y);
    CHECK((gx[0] - gy[0]) * (x[0] - y[0]) + (gx[1] - gy[1]) * (x[1] - y[1]) >= -1e-8);
  }

  const GradFieldResult b = run_gradfield(spec, cfg);
  CHECK(a.mse_db == b.mse_db);

  const auto dir = std::filesystem::temp_directory_path() / "mgn_test_gradfield";
  std::filesystem::create_directories(dir);
  write_error_csv(dir / "error.csv", a);
  write_quiver_csv(dir / "quiver.csv", a);
  write_error_pgm(dir / "error.pgm", a);
  const std::string pgm = mgn::io::read_text(dir / "error.pgm");
  CHECK(pgm.rfind("P5\n101 101\n255\n", 0) == 0);
  CHECK(pgm.size() == std::string("P5\n101 101\n255\n").size() + kLattice * kLattice);
  const std::string quiver = mgn::io::read_text(dir / "quiver.csv");
  CHECK(std::count(quiver.begin(), quiver.end(), '\n') == 1 + kLattice * kLattice);
}
