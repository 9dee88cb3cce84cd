#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mgn/linalg.hpp"
#include "mgn/model.hpp"

namespace mgn::train {

using linalg::DenseMatrix;
using linalg::DenseVector;
using model::Model;

/// mean over the batch of (1/n) Σ_i |g(x)_i − t_i|
struct MaeLoss {};

/// Standard-normal prior change of variables:
///   (n/2) log 2π + ‖g(x)‖²/2 − log det J_g(x)
struct FlowNllLoss {};

/// Negative log-likelihood of g(x) under N(mean, L Lᵀ):
///   (n/2) log 2π + ½ log det Σ + ½ ‖L⁻¹(g(x) − mean)‖² − log det J_g(x)
struct GaussianNllLoss {
  DenseVector mean;
  DenseMatrix chol;  // lower factor of the target covariance
};

using Loss = std::variant<MaeLoss, FlowNllLoss, GaussianNllLoss>;

bool needs_targets(const Loss& loss);

/// Rows of `inputs` (and matching rows of `targets` when the loss needs them).
struct Batch {
  const DenseMatrix* inputs = nullptr;
  const DenseMatrix* targets = nullptr;
  std::vector<std::size_t> rows;

  static Batch all(const DenseMatrix& inputs, const DenseMatrix* targets = nullptr);
  std::size_t size() const { return rows.size(); }
};

/// Mean batch loss; per-sample evaluations may run in parallel, summation order is fixed.
double batch_loss(const Model& m, const Loss& loss, const Batch& batch);
/// Per-sample losses in batch order.
std::vector<double> sample_losses(const Model& m, const Loss& loss, const Batch& batch);

struct LossAndGrad {
  double value = 0.0;
  DenseVector grad;
};

/// Forward-mode parameter gradient of the mean batch loss. Parameters are
/// seeded in chunks of kChunk tangents per pass; chunks run in parallel.
/// Throws NonFiniteLoss when any value or derivative is not finite.
LossAndGrad loss_and_grad(const Model& m, const Loss& loss, const Batch& batch);
DenseVector param_grad(const Model& m, const Loss& loss, const Batch& batch);

inline constexpr std::size_t kChunk = 16;

/// Serial single-tangent version: one forward pass per parameter. Kept as the
/// oracle for loss_and_grad.
DenseVector param_grad_reference(const Model& m, const Loss& loss, const Batch& batch);

enum class LossKind { Mae, FlowNll };

struct TrainConfig {
  std::size_t batch_size = 512;
  std::size_t epochs = 10;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 42;
  LossKind loss = LossKind::Mae;

  /// Throws InvalidSpec when a field is out of range.
  void validate() const;
};

struct AdamState {
  DenseVector m;
  DenseVector v;
  std::uint64_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n), v(n) {}
};

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainConfig& cfg);

struct TrainReport {
  std::vector<double> epoch_losses;
  double final_loss = 0.0;
  std::size_t steps = 0;
  double seconds = 0.0;
  TrainConfig config;
  bool aborted = false;
  std::string message;

  std::string to_json() const;
  void write_loss_csv(const std::filesystem::path& path) const;
};

/// Thrown when training hits a non-finite loss; carries the epochs completed so far.
class TrainingAborted : public Error {
 public:
  TrainingAborted(const std::string& what, TrainReport partial)
      : Error(ErrorKind::NonFiniteLoss, what), report_(std::move(partial)) {}
  const TrainReport& report() const { return report_; }

 private:
  TrainReport report_;
};

struct Dataset {
  DenseMatrix inputs;
  std::optional<DenseMatrix> targets;

  std::size_t size() const { return inputs.rows(); }
};

struct TrainResult {
  Model model;
  TrainReport report;
};

/// Called after every epoch with (epoch index, model, epoch mean loss).
using EpochCallback = std::function<void(std::size_t, const Model&, double)>;

/// epochs × ceil(N / batch_size) Adam steps; data order reshuffled per epoch
/// from the "shuffle" stream of cfg.seed.
TrainResult train(Model model, const Dataset& data, const Loss& loss, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

}  // namespace mgn::train
