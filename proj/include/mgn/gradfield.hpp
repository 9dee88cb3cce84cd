#pragma once

#include <filesystem>
#include <span>

#include "mgn/linalg.hpp"
#include "mgn/model.hpp"
#include "mgn/training.hpp"

namespace mgn::gradfield {

using linalg::DenseMatrix;
using linalg::DenseVector;

/// f(x) = x₁⁴ + x₂/2 + x₁x₂/2 + 3x₂²/2 − x₂³/3
double potential(std::span<const double> x);
/// ∇f(x) = (4x₁³ + x₂/2, 1/2 + x₁/2 + 3x₂ − x₂²)
DenseVector true_gradient(std::span<const double> x);

inline constexpr std::size_t kLattice = 101;
inline constexpr double kFloorDb = -120.0;

struct GradFieldConfig {
  std::size_t samples = 1'000'000;
  train::TrainConfig train;
  std::uint64_t seed = 42;
};

struct GradFieldResult {
  double mse_db = 0.0;
  std::size_t param_count = 0;
  DenseMatrix error_grid;  // kLattice × kLattice; row = x₂ index, column = x₁ index
  DenseMatrix lattice;     // kLattice² × 2 evaluation points, row-major over the grid
  DenseMatrix predicted;   // model output at each lattice point
  model::Model model;
  train::TrainReport train_report;
};

/// Lattice points (i/100, j/100), ordered with x₁ fastest.
DenseMatrix evaluation_lattice();

/// Evaluates a model on the lattice: fills error_grid, predicted and mse_db.
GradFieldResult evaluate(const model::Model& m);

/// 10·log₁₀ of the mean of error_grid², floored at −120 dB.
double mse_db_from_grid(const DenseMatrix& error_grid);

/// Trains on cfg.samples uniform points of [0,1]² (stream "data") with MAE loss.
GradFieldResult run_gradfield(const model::ModelSpec& spec, const GradFieldConfig& cfg);

/// Closed loop (0,0)→(1,0)→(1,1)→(0,1)→(0,0) integral of g·dl with
/// `points`-point trapezoidal quadrature per edge, and mean ‖g‖ over the nodes.
/// For n > 2 the loop lies in the (x₁, x₂) plane with the other coordinates at 0.
struct LoopIntegral {
  double circulation = 0.0;
  double mean_norm = 0.0;
};
LoopIntegral loop_integral(const model::Model& m, std::size_t points = 10000);

void write_error_csv(const std::filesystem::path& path, const GradFieldResult& r);
/// 8-bit greymap scaled so the grid maximum maps to 255.
void write_error_pgm(const std::filesystem::path& path, const GradFieldResult& r);
/// lattice point, predicted vector, true vector.
void write_quiver_csv(const std::filesystem::path& path, const GradFieldResult& r);

}  // namespace mgn::gradfield
