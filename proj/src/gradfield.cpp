#include "mgn/gradfield.hpp"

#include <algorithm>
#include <cmath>

#include "mgn/io.hpp"
#include "mgn/random.hpp"

namespace mgn::gradfield {

double potential(std::span<const double> x) {
  const double a = x[0], b = x[1];
  return a * a * a * a + b / 2.0 + a * b / 2.0 + 1.5 * b * b - b * b * b / 3.0;
}

DenseVector true_gradient(std::span<const double> x) {
  if (x.size() != 2) throw Error(ErrorKind::DimensionMismatch, "gradient field is two-dimensional");
  const double a = x[0], b = x[1];
  return {4.0 * a * a * a + b / 2.0, 0.5 + a / 2.0 + 3.0 * b - b * b};
}

DenseMatrix evaluation_lattice() {
  DenseMatrix pts(kLattice * kLattice, 2);
  const double step = 1.0 / static_cast<double>(kLattice - 1);
  for (std::size_t j = 0; j < kLattice; ++j)
    for (std::size_t i = 0; i < kLattice; ++i) {
      pts(j * kLattice + i, 0) = static_cast<double>(i) * step;
      pts(j * kLattice + i, 1) = static_cast<double>(j) * step;
    }
  return pts;
}

double mse_db_from_grid(const DenseMatrix& error_grid) {
  double acc = 0.0;
  for (double e : error_grid.span()) acc += e * e;
  const double mse = acc / static_cast<double>(error_grid.span().size());
  if (!(mse > 0.0)) return kFloorDb;
  return std::max(kFloorDb, 10.0 * std::log10(mse));
}

GradFieldResult evaluate(const model::Model& m) {
  if (model::input_dim(m) != 2) throw Error(ErrorKind::DimensionMismatch, "gradient-field model must have n = 2");
  GradFieldResult r;
  r.param_count = model::param_count(m);
  r.lattice = evaluation_lattice();
  r.predicted = model::forward_batch(m, r.lattice);
  r.error_grid = DenseMatrix(kLattice, kLattice);
  for (std::size_t p = 0; p < r.lattice.rows(); ++p) {
    const DenseVector t = true_gradient(r.lattice.row(p));
    const double e0 = r.predicted(p, 0) - t[0];
    const double e1 = r.predicted(p, 1) - t[1];
    r.error_grid.span()[p] = std::sqrt(e0 * e0 + e1 * e1);
  }
  r.mse_db = mse_db_from_grid(r.error_grid);
  r.model = m;
  return r;
}

GradFieldResult run_gradfield(const model::ModelSpec& spec, const GradFieldConfig& cfg) {
  if (spec.n != 2) throw Error(ErrorKind::InvalidSpec, "gradient-field model must have n = 2");
  model::Model m = model::init_params(spec, cfg.seed);

  auto gen = rng::stream(cfg.seed, "data");
  train::Dataset ds{rng::uniform_points(gen, cfg.samples, 2), DenseMatrix(cfg.samples, 2)};
  for (std::size_t r = 0; r < cfg.samples; ++r) {
    const DenseVector g = true_gradient(ds.inputs.row(r));
    (*ds.targets)(r, 0) = g[0];
    (*ds.targets)(r, 1) = g[1];
  }
  train::TrainConfig tc = cfg.train;
  tc.loss = train::LossKind::Mae;
  tc.seed = cfg.seed;
  auto trained = train::train(std::move(m), ds, train::MaeLoss{}, tc);
  GradFieldResult r = evaluate(trained.model);
  r.train_report = std::move(trained.report);
  return r;
}

LoopIntegral loop_integral(const model::Model& m, std::size_t points) {
  const std::size_t n = model::input_dim(m);
  if (n < 2) throw Error(ErrorKind::DimensionMismatch, "loop integral needs n >= 2");
  if (points < 2) throw Error(ErrorKind::InvalidSpec, "need at least two quadrature points");
  struct Edge {
    double x0, y0, dx, dy;
  };
  const Edge edges[4] = {{0, 0, 1, 0}, {1, 0, 0, 1}, {1, 1, -1, 0}, {0, 1, 0, -1}};
  DenseMatrix nodes(4 * points, n);
  for (std::size_t e = 0; e < 4; ++e)
    for (std::size_t k = 0; k < points; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(points - 1);
      nodes(e * points + k, 0) = edges[e].x0 + t * edges[e].dx;
      nodes(e * points + k, 1) = edges[e].y0 + t * edges[e].dy;
    }
  const DenseMatrix g = model::forward_batch(m, nodes);

  LoopIntegral out;
  const double h = 1.0 / static_cast<double>(points - 1);
  for (std::size_t e = 0; e < 4; ++e) {
    double edge = 0.0;
    for (std::size_t k = 0; k < points; ++k) {
      const std::size_t row = e * points + k;
      const double w = (k == 0 || k + 1 == points) ? 0.5 : 1.0;
      edge += w * (g(row, 0) * edges[e].dx + g(row, 1) * edges[e].dy);
    }
    out.circulation += h * edge;
  }
  for (std::size_t row = 0; row < nodes.rows(); ++row) out.mean_norm += linalg::norm2(g.row(row));
  out.mean_norm /= static_cast<double>(nodes.rows());
  return out;
}

void write_error_csv(const std::filesystem::path& path, const GradFieldResult& r) {
  io::CsvWriter csv(path, {"x1", "x2", "l2_error"});
  for (std::size_t p = 0; p < r.lattice.rows(); ++p) {
    csv.cell(r.lattice(p, 0)).cell(r.lattice(p, 1)).cell(r.error_grid.span()[p]);
    csv.end_row();
  }
}

void write_error_pgm(const std::filesystem::path& path, const GradFieldResult& r) {
  const auto span = r.error_grid.span();
  const double peak = span.empty() ? 0.0 : *std::max_element(span.begin(), span.end());
  std::vector<std::uint8_t> px(span.size());
  const std::size_t w = r.error_grid.cols(), h = r.error_grid.rows();
  // Image rows run top to bottom, so x₂ = 1 is written first.
  for (std::size_t j = 0; j < h; ++j)
    for (std::size_t i = 0; i < w; ++i) {
      const double v = peak > 0.0 ? r.error_grid(j, i) / peak : 0.0;
      px[(h - 1 - j) * w + i] = static_cast<std::uint8_t>(std::floor(255.0 * v + 0.5));
    }
  io::write_pgm(path, w, h, px);
}

void write_quiver_csv(const std::filesystem::path& path, const GradFieldResult& r) {
  io::CsvWriter csv(path, {"x1", "x2", "pred1", "pred2", "true1", "true2"});
  for (std::size_t p = 0; p < r.lattice.rows(); ++p) {
    const DenseVector t = true_gradient(r.lattice.row(p));
    csv.cell(r.lattice(p, 0)).cell(r.lattice(p, 1)).cell(r.predicted(p, 0)).cell(r.predicted(p, 1));
    csv.cell(t[0]).cell(t[1]);
    csv.end_row();
  }
}

}  // namespace mgn::gradfield
