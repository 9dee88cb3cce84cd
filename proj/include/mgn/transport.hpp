#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mgn/linalg.hpp"
#include "mgn/model.hpp"
#include "mgn/training.hpp"

namespace mgn::transport {

using linalg::DenseMatrix;
using linalg::DenseVector;

/// Multivariate normal with its lower Cholesky factor cached.
class GaussianModel {
 public:
  /// Throws NotPositiveDefinite / NonSymmetric through cholesky.
  GaussianModel(DenseVector mean, DenseMatrix covariance);

  static GaussianModel standard(std::size_t d);

  std::size_t dim() const { return mean_.size(); }
  const DenseVector& mean() const { return mean_; }
  const DenseMatrix& covariance() const { return cov_; }
  const DenseMatrix& chol() const { return chol_; }
  double logdet() const;
  /// (d/2) log(2πe) + ½ log det Σ
  double entropy() const;

 private:
  DenseVector mean_;
  DenseMatrix cov_;
  DenseMatrix chol_;
};

/// Sample mean and unbiased covariance plus a 1e-6·tr/d ridge. Rows are samples.
/// Throws DegenerateData for fewer than d+1 samples or a singular covariance.
GaussianModel fit_gaussian(const DenseMatrix& samples);

/// count × d draws of mean + L·ε, deterministic per seed.
DenseMatrix gaussian_sample(const GaussianModel& g, std::size_t count, std::uint64_t seed);

/// L⁻¹(x − mean)
DenseVector whitening_map(const GaussianModel& g, std::span<const double> x);

/// Squared 2-Wasserstein distance between Gaussians:
///   ‖μp − μq‖² + tr(Σp + Σq − 2 (Σq^½ Σp Σq^½)^½)
double bures_wasserstein_cost(const GaussianModel& p, const GaussianModel& q);

/// KL(p ‖ q) in nats.
double kl_divergence(const GaussianModel& p, const GaussianModel& q);

/// Random Gaussian with mean ~ N(0, mean_scale² I) and covariance Q diag(λ) Qᵀ,
/// λ log-uniform in [eig_min, eig_max], Q a random rotation.
GaussianModel random_gaussian(std::size_t d, std::uint64_t seed, double mean_scale, double eig_min, double eig_max);

struct CouplingReport {
  std::string method;
  std::size_t d = 0;
  double nll = 0.0;            // nats per sample on the held-out set
  double cost = 0.0;           // mean ‖x − g(x)‖²
  double optimal_cost = 0.0;   // Bures–Wasserstein oracle against N(0, I)
  double entropy_bound = 0.0;  // differential entropy of the data Gaussian
  std::uint64_t seed = 0;
};

struct CouplingConfig {
  std::size_t train_samples = 20000;
  std::size_t test_samples = 100000;
  train::TrainConfig train;
  std::uint64_t seed = 42;
};

struct CouplingRun {
  CouplingReport report;
  DenseMatrix test_points;
  DenseMatrix mapped;
  model::Model model;
  train::TrainReport train_report;
};

/// Trains a flow (flow NLL) on samples of `data`, evaluates on a held-out set.
/// Requires spec.gamma > 0.
CouplingRun run_coupling(const model::ModelSpec& spec, const GaussianModel& data, const CouplingConfig& cfg);

/// Whitening-transform baseline on the same held-out set as run_coupling.
CouplingRun run_whitening(const GaussianModel& data, const CouplingConfig& cfg);

void append_coupling_csv(const std::filesystem::path& path, const CouplingReport& r);

/// Before/after point pairs (first two coordinates), with each point's rank
/// along the first axis of the original data for colouring.
void write_scatter_csv(const std::filesystem::path& path, const DenseMatrix& before, const DenseMatrix& after,
                       std::size_t limit = 2000);

}  // namespace mgn::transport
