#include "mgn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numbers>
#include <numeric>

#include "json.hpp"
#include "mgn/io.hpp"
#include "mgn/kernels.hpp"
#include "mgn/random.hpp"

namespace mgn::train {

namespace kn = mgn::kernel;
using linalg::Dual;

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // ½ log 2π

template <class T>
struct Workspace {
  std::vector<T> out, jac, w;
};

template <class T>
T log_det_jacobian(std::vector<T>& jac, std::size_t n) {
  if (!linalg::cholesky_in_place(std::span<T>(jac), n))
    throw Error(ErrorKind::NotPositiveDefinite, "model Jacobian lost positive definiteness (gamma = 0?)");
  return linalg::logdet_from_cholesky(std::span<const T>(jac), n);
}

/// One sample's loss evaluated with kernel `k` over scalar type T.
template <class T, class K>
T sample_loss(K& k, const Loss& loss, std::span<const double> x, std::span<const double> target, Workspace<T>& ws) {
  using std::abs;
  const std::size_t n = k.dim();
  ws.out.resize(n);
  return std::visit(
      [&](const auto& l) -> T {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, MaeLoss>) {
          k.forward(x, ws.out);
          T acc(0.0);
          for (std::size_t i = 0; i < n; ++i) acc += abs(ws.out[i] - target[i]);
          return acc / static_cast<double>(n);
        } else if constexpr (std::is_same_v<L, FlowNllLoss>) {
          ws.jac.resize(n * n);
          k.forward_jacobian(x, ws.out, ws.jac);
          T sq(0.0);
          for (std::size_t i = 0; i < n; ++i) sq += ws.out[i] * ws.out[i];
          return static_cast<double>(n) * kHalfLog2Pi + 0.5 * sq - log_det_jacobian(ws.jac, n);
        } else {
          ws.jac.resize(n * n);
          ws.w.resize(n);
          k.forward_jacobian(x, ws.out, ws.jac);
          double logdet_sigma = 0.0;
          for (std::size_t i = 0; i < n; ++i) logdet_sigma += 2.0 * std::log(l.chol(i, i));
          T sq(0.0);
          for (std::size_t i = 0; i < n; ++i) {
            T s = ws.out[i] - l.mean[i];
            for (std::size_t j = 0; j < i; ++j) s -= l.chol(i, j) * ws.w[j];
            ws.w[i] = s / l.chol(i, i);
            sq += ws.w[i] * ws.w[i];
          }
          return static_cast<double>(n) * kHalfLog2Pi + 0.5 * logdet_sigma + 0.5 * sq - log_det_jacobian(ws.jac, n);
        }
      },
      loss);
}

void check_batch(const Model& m, const Loss& loss, const Batch& batch) {
  if (!batch.inputs) throw Error(ErrorKind::DimensionMismatch, "batch has no inputs");
  const std::size_t n = model::input_dim(m);
  if (batch.inputs->cols() != n) throw Error(ErrorKind::DimensionMismatch, "batch inputs have wrong dimension");
  if (needs_targets(loss)) {
    if (!batch.targets) throw Error(ErrorKind::DimensionMismatch, "loss needs targets");
    if (batch.targets->cols() != n || batch.targets->rows() != batch.inputs->rows())
      throw Error(ErrorKind::DimensionMismatch, "targets do not match inputs");
  }
  if (const auto* g = std::get_if<GaussianNllLoss>(&loss)) {
    if (g->mean.size() != n || g->chol.rows() != n || g->chol.cols() != n)
      throw Error(ErrorKind::DimensionMismatch, "target Gaussian has wrong dimension");
  }
  for (std::size_t r : batch.rows)
    if (r >= batch.inputs->rows()) throw Error(ErrorKind::DimensionMismatch, "batch row out of range");
}

std::span<const double> target_row(const Batch& b, std::size_t r) {
  return b.targets ? b.targets->row(r) : std::span<const double>{};
}

/// Sum over the batch, in batch order, of the loss evaluated on T-valued parameters.
template <class T>
T batch_sum(const kn::Layout& layout, std::span<const T> theta, const Loss& loss, const Batch& batch) {
  return kn::with_kernel<T>(layout, theta, [&](auto& k) {
    Workspace<T> ws;
    T acc(0.0);
    for (std::size_t r : batch.rows) acc += sample_loss<T>(k, loss, batch.inputs->row(r), target_row(batch, r), ws);
    return acc;
  });
}

template <class Body>
void parallel_for_rethrow(std::ptrdiff_t count, Body&& body) {
  std::exception_ptr first;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(mgn_train_error)
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace

bool needs_targets(const Loss& loss) { return std::holds_alternative<MaeLoss>(loss); }

Batch Batch::all(const DenseMatrix& inputs, const DenseMatrix* targets) {
  Batch b{&inputs, targets, std::vector<std::size_t>(inputs.rows())};
  std::iota(b.rows.begin(), b.rows.end(), std::size_t{0});
  return b;
}

std::vector<double> sample_losses(const Model& m, const Loss& loss, const Batch& batch) {
  check_batch(m, loss, batch);
  const model::ParamView pv = model::flatten(m);
  const kn::Layout layout = kn::layout_of(m);
  std::vector<double> values(batch.size());
  const auto count = static_cast<std::ptrdiff_t>(batch.size());
  std::exception_ptr first;
#pragma omp parallel
  {
    Workspace<double> ws;
    kn::with_kernel<double>(layout, pv.flat.span(), [&](auto& k) {
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < count; ++i) {
        const std::size_t r = batch.rows[static_cast<std::size_t>(i)];
        try {
          values[static_cast<std::size_t>(i)] = sample_loss<double>(k, loss, batch.inputs->row(r), target_row(batch, r), ws);
        } catch (...) {
#pragma omp critical(mgn_train_error)
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  if (first) std::rethrow_exception(first);
  return values;
}

double batch_loss(const Model& m, const Loss& loss, const Batch& batch) {
  const std::vector<double> v = sample_losses(m, loss, batch);
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

LossAndGrad loss_and_grad(const Model& m, const Loss& loss, const Batch& batch) {
  check_batch(m, loss, batch);
  if (batch.size() == 0) throw Error(ErrorKind::DimensionMismatch, "empty batch");
  const model::ParamView pv = model::flatten(m);
  const kn::Layout layout = kn::layout_of(m);
  const std::size_t P = pv.flat.size();
  const std::size_t chunks = std::max<std::size_t>(1, (P + kChunk - 1) / kChunk);
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  LossAndGrad result{0.0, DenseVector(P)};
  std::vector<double> chunk_values(chunks);
  parallel_for_rethrow(static_cast<std::ptrdiff_t>(chunks), [&](std::ptrdiff_t c) {
    using D = Dual<kChunk>;
    const std::size_t first = static_cast<std::size_t>(c) * kChunk;
    std::vector<D> theta(P);
    for (std::size_t p = 0; p < P; ++p) theta[p] = D(pv.flat[p]);
    for (std::size_t j = 0; j < kChunk && first + j < P; ++j) theta[first + j].d[j] = 1.0;
    const D sum = batch_sum<D>(layout, std::span<const D>(theta), loss, batch);
    chunk_values[static_cast<std::size_t>(c)] = sum.v * inv_n;
    for (std::size_t j = 0; j < kChunk && first + j < P; ++j) result.grad[first + j] = sum.d[j] * inv_n;
  });
  result.value = chunk_values[0];
  if (!std::isfinite(result.value)) throw Error(ErrorKind::NonFiniteLoss, "loss is not finite");
  for (double g : result.grad)
    if (!std::isfinite(g)) throw Error(ErrorKind::NonFiniteLoss, "loss gradient is not finite");
  return result;
}

DenseVector param_grad(const Model& m, const Loss& loss, const Batch& batch) { return loss_and_grad(m, loss, batch).grad; }

DenseVector param_grad_reference(const Model& m, const Loss& loss, const Batch& batch) {
  check_batch(m, loss, batch);
  if (batch.size() == 0) throw Error(ErrorKind::DimensionMismatch, "empty batch");
  const model::ParamView pv = model::flatten(m);
  const kn::Layout layout = kn::layout_of(m);
  const std::size_t P = pv.flat.size();
  using D = linalg::DualScalar;
  DenseVector grad(P);
  std::vector<D> theta(P);
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t q = 0; q < P; ++q) theta[q] = D(pv.flat[q]);
    theta[p].d[0] = 1.0;
    const D sum = batch_sum<D>(layout, std::span<const D>(theta), loss, batch);
    if (!linalg::isfinite(sum)) throw Error(ErrorKind::NonFiniteLoss, "non-finite pass for parameter " + std::to_string(p));
    grad[p] = sum.d[0] / static_cast<double>(batch.size());
  }
  return grad;
}

void TrainConfig::validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorKind::InvalidSpec, msg); };
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) bad("learning_rate must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) bad("adam_beta1 must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) bad("adam_beta2 must lie in [0, 1)");
  if (!(adam_eps > 0.0)) bad("adam_eps must be > 0");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw Error(ErrorKind::DimensionMismatch, "adam_step lengths differ");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.adam_beta1 * state.m[i] + (1.0 - cfg.adam_beta1) * grads[i];
    state.v[i] = cfg.adam_beta2 * state.v[i] + (1.0 - cfg.adam_beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
  }
}

std::string TrainReport::to_json() const {
  nlohmann::ordered_json j;
  j["epoch_losses"] = epoch_losses;
  j["final_loss"] = final_loss;
  j["steps"] = steps;
  j["seconds"] = seconds;
  j["aborted"] = aborted;
  if (!message.empty()) j["message"] = message;
  j["config"] = {{"batch_size", config.batch_size},     {"epochs", config.epochs},
                 {"learning_rate", config.learning_rate}, {"adam_beta1", config.adam_beta1},
                 {"adam_beta2", config.adam_beta2},       {"adam_eps", config.adam_eps},
                 {"seed", config.seed},                   {"loss", config.loss == LossKind::Mae ? "mae" : "flow_nll"}};
  return j.dump(2) + "\n";
}

void TrainReport::write_loss_csv(const std::filesystem::path& path) const {
  io::CsvWriter csv(path, {"epoch", "loss"});
  for (std::size_t e = 0; e < epoch_losses.size(); ++e) {
    csv.cell(e + 1).cell(epoch_losses[e]);
    csv.end_row();
  }
}

TrainResult train(Model model, const Dataset& data, const Loss& loss, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  report.config = cfg;
  const DenseMatrix* targets = data.targets ? &*data.targets : nullptr;
  const std::size_t N = data.size();

  model::ParamView pv = model::flatten(model);
  AdamState adam(pv.flat.size());
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});

  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  for (std::size_t epoch = 0; epoch < cfg.epochs && N > 0; ++epoch) {
    auto gen = rng::stream(cfg.seed, "shuffle", epoch);
    std::shuffle(order.begin(), order.end(), gen);
    double weighted = 0.0;
    for (std::size_t startRow = 0; startRow < N; startRow += cfg.batch_size) {
      const std::size_t stop = std::min(N, startRow + cfg.batch_size);
      Batch batch{&data.inputs, targets, std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(startRow),
                                                                  order.begin() + static_cast<std::ptrdiff_t>(stop))};
      LossAndGrad lg;
      try {
        lg = loss_and_grad(model, loss, batch);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonFiniteLoss && e.kind() != ErrorKind::NotPositiveDefinite) throw;
        report.aborted = true;
        report.message = e.what();
        report.seconds = elapsed();
        throw TrainingAborted(e.what(), report);
      }
      weighted += lg.value * static_cast<double>(batch.size());
      adam_step(pv.flat.span(), lg.grad.span(), adam, cfg);
      model = model::unflatten(model, pv.flat.span());
      ++report.steps;
    }
    const double epoch_loss = weighted / static_cast<double>(N);
    report.epoch_losses.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, model, epoch_loss);
  }
  report.final_loss = report.epoch_losses.empty() ? 0.0 : report.epoch_losses.back();
  report.seconds = elapsed();
  return {std::move(model), std::move(report)};
}

}  // namespace mgn::train
