#include "mgn/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "mgn/io.hpp"
#include "mgn/random.hpp"

namespace mgn::transport {

GaussianModel::GaussianModel(DenseVector mean, DenseMatrix covariance)
    : mean_(std::move(mean)), cov_(std::move(covariance)) {
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size())
    throw Error(ErrorKind::DimensionMismatch, "covariance does not match mean");
  chol_ = linalg::cholesky(cov_);
}

GaussianModel GaussianModel::standard(std::size_t d) { return {DenseVector(d), DenseMatrix::identity(d)}; }

double GaussianModel::logdet() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < dim(); ++i) acc += std::log(chol_(i, i));
  return 2.0 * acc;
}

double GaussianModel::entropy() const {
  const double d = static_cast<double>(dim());
  return 0.5 * d * std::log(2.0 * std::numbers::pi * std::numbers::e) + 0.5 * logdet();
}

GaussianModel fit_gaussian(const DenseMatrix& samples) {
  const std::size_t count = samples.rows(), d = samples.cols();
  if (d == 0) throw Error(ErrorKind::DegenerateData, "zero-dimensional samples");
  if (count < d + 1)
    throw Error(ErrorKind::DegenerateData, "need at least d+1 samples, got " + std::to_string(count));

  DenseVector mean(d);
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t j = 0; j < d; ++j) mean[j] += samples(r, j);
  mean *= 1.0 / static_cast<double>(count);

  DenseMatrix cov(d, d);
  std::vector<double> c(d);
  for (std::size_t r = 0; r < count; ++r) {
    for (std::size_t j = 0; j < d; ++j) c[j] = samples(r, j) - mean[j];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) cov(i, j) += c[i] * c[j];
  }
  const double denom = static_cast<double>(count - 1);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) cov(j, i) = cov(i, j) = cov(i, j) / denom;

  const double ridge = 1e-6 * cov.trace() / static_cast<double>(d);
  for (std::size_t i = 0; i < d; ++i) cov(i, i) += ridge;
  try {
    return {std::move(mean), std::move(cov)};
  } catch (const Error& e) {
    throw Error(ErrorKind::DegenerateData, std::string("covariance is singular: ") + e.what());
  }
}

DenseMatrix gaussian_sample(const GaussianModel& g, std::size_t count, std::uint64_t seed) {
  auto gen = rng::stream(seed, "gaussian");
  const DenseMatrix eps = rng::normal_points(gen, count, g.dim());
  DenseMatrix out(count, g.dim());
  const DenseMatrix& l = g.chol();
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t i = 0; i < g.dim(); ++i) {
      double acc = g.mean()[i];
      for (std::size_t k = 0; k <= i; ++k) acc += l(i, k) * eps(r, k);
      out(r, i) = acc;
    }
  return out;
}

DenseVector whitening_map(const GaussianModel& g, std::span<const double> x) {
  if (x.size() != g.dim()) throw Error(ErrorKind::DimensionMismatch, "whitening_map input has wrong dimension");
  DenseVector c(x);
  c -= g.mean();
  return linalg::forward_substitute(g.chol(), c.span());
}

double bures_wasserstein_cost(const GaussianModel& p, const GaussianModel& q) {
  if (p.dim() != q.dim()) throw Error(ErrorKind::DimensionMismatch, "Gaussians differ in dimension");
  const DenseVector dm = p.mean() - q.mean();
  const DenseMatrix rq = linalg::sqrt_psd(q.covariance());
  DenseMatrix inner = rq * p.covariance() * rq;
  for (std::size_t i = 0; i < inner.rows(); ++i)
    for (std::size_t j = i + 1; j < inner.cols(); ++j) inner(i, j) = inner(j, i) = 0.5 * (inner(i, j) + inner(j, i));
  const DenseMatrix cross = linalg::sqrt_psd(inner);
  const double cost = linalg::dot(dm.span(), dm.span()) + p.covariance().trace() + q.covariance().trace() -
                      2.0 * cross.trace();
  return std::max(cost, 0.0);
}

double kl_divergence(const GaussianModel& p, const GaussianModel& q) {
  if (p.dim() != q.dim()) throw Error(ErrorKind::DimensionMismatch, "Gaussians differ in dimension");
  const std::size_t d = p.dim();
  // tr(Σq⁻¹ Σp) = ‖Lq⁻¹ Lp‖_F²
  double trace_term = 0.0;
  std::vector<double> col(d);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < d; ++i) col[i] = p.chol()(i, j);
    const DenseVector y = linalg::forward_substitute(q.chol(), col);
    trace_term += linalg::dot(y.span(), y.span());
  }
  const DenseVector dm = q.mean() - p.mean();
  const DenseVector w = linalg::forward_substitute(q.chol(), dm.span());
  const double kl =
      0.5 * (trace_term + linalg::dot(w.span(), w.span()) - static_cast<double>(d) + q.logdet() - p.logdet());
  return std::max(kl, 0.0);
}

GaussianModel random_gaussian(std::size_t d, std::uint64_t seed, double mean_scale, double eig_min, double eig_max) {
  if (d == 0) throw Error(ErrorKind::InvalidSpec, "dimension must be positive");
  if (!(eig_min > 0.0 && eig_max >= eig_min)) throw Error(ErrorKind::InvalidSpec, "need 0 < eig_min <= eig_max");
  auto gen = rng::stream(seed, "data_gaussian");
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> u(std::log(eig_min), std::log(eig_max));

  DenseVector mean(d);
  for (double& v : mean) v = mean_scale * nd(gen);

  // Gram–Schmidt on a Gaussian matrix gives a random rotation.
  DenseMatrix q(d, d);
  for (double& v : q.span()) v = nd(gen);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double proj = 0.0;
      for (std::size_t i = 0; i < d; ++i) proj += q(i, j) * q(i, k);
      for (std::size_t i = 0; i < d; ++i) q(i, j) -= proj * q(i, k);
    }
    double nrm = 0.0;
    for (std::size_t i = 0; i < d; ++i) nrm += q(i, j) * q(i, j);
    nrm = std::sqrt(nrm);
    for (std::size_t i = 0; i < d; ++i) q(i, j) /= nrm;
  }
  std::vector<double> lambda(d);
  for (double& l : lambda) l = std::exp(u(gen));

  DenseMatrix cov(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += q(i, k) * lambda[k] * q(j, k);
      cov(i, j) = cov(j, i) = acc;
    }
  return {std::move(mean), std::move(cov)};
}

namespace {

double mean_sq_displacement(const DenseMatrix& before, const DenseMatrix& after) {
  double acc = 0.0;
  for (std::size_t r = 0; r < before.rows(); ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < before.cols(); ++j) {
      const double dlt = before(r, j) - after(r, j);
      s += dlt * dlt;
    }
    acc += s;
  }
  return acc / static_cast<double>(before.rows());
}

DenseMatrix test_set(const GaussianModel& data, const CouplingConfig& cfg) {
  return gaussian_sample(data, cfg.test_samples, cfg.seed ^ 0x7465737400000000ull);
}

CouplingReport base_report(const std::string& method, const GaussianModel& data, const CouplingConfig& cfg) {
  CouplingReport r;
  r.method = method;
  r.d = data.dim();
  r.optimal_cost = bures_wasserstein_cost(data, GaussianModel::standard(data.dim()));
  r.entropy_bound = data.entropy();
  r.seed = cfg.seed;
  return r;
}

}  // namespace

CouplingRun run_coupling(const model::ModelSpec& spec, const GaussianModel& data, const CouplingConfig& cfg) {
  if (!(spec.gamma > 0.0)) throw Error(ErrorKind::InvalidSpec, "coupling flows need gamma > 0");
  if (spec.n != data.dim()) throw Error(ErrorKind::InvalidSpec, "model dimension differs from data dimension");
  if (cfg.test_samples == 0) throw Error(ErrorKind::InvalidSpec, "test_samples must be positive");

  model::Model m = model::init_params(spec, cfg.seed);
  train::Dataset ds{gaussian_sample(data, cfg.train_samples, cfg.seed), std::nullopt};
  train::TrainConfig tc = cfg.train;
  tc.loss = train::LossKind::FlowNll;
  auto trained = train::train(std::move(m), ds, train::FlowNllLoss{}, tc);

  CouplingRun run{base_report(std::string(model::architecture_name(spec.arch)), data, cfg), test_set(data, cfg),
                  DenseMatrix(), std::move(trained.model), std::move(trained.report)};
  run.mapped = model::forward_batch(run.model, run.test_points);
  run.report.nll = train::batch_loss(run.model, train::FlowNllLoss{}, train::Batch::all(run.test_points));
  run.report.cost = mean_sq_displacement(run.test_points, run.mapped);
  return run;
}

CouplingRun run_whitening(const GaussianModel& data, const CouplingConfig& cfg) {
  CouplingRun run{base_report("whitening", data, cfg), test_set(data, cfg), DenseMatrix(), model::Model{}, {}};
  const std::size_t d = data.dim();
  run.mapped = DenseMatrix(run.test_points.rows(), d);
  const double n_half_log_2pi = 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi);
  double nll = 0.0;
  for (std::size_t r = 0; r < run.test_points.rows(); ++r) {
    const DenseVector z = whitening_map(data, run.test_points.row(r));
    std::copy(z.begin(), z.end(), run.mapped.row(r).begin());
    nll += n_half_log_2pi + 0.5 * linalg::dot(z.span(), z.span()) + 0.5 * data.logdet();
  }
  run.report.nll = nll / static_cast<double>(run.test_points.rows());
  run.report.cost = mean_sq_displacement(run.test_points, run.mapped);
  return run;
}

void append_coupling_csv(const std::filesystem::path& path, const CouplingReport& r) {
  io::CsvWriter csv(path, {"method", "d", "nll", "cost", "optimal_cost", "entropy_bound", "seed"}, true);
  csv.cell(r.method).cell(r.d).cell(r.nll).cell(r.cost).cell(r.optimal_cost).cell(r.entropy_bound);
  csv.cell(std::to_string(r.seed));
  csv.end_row();
}

void write_scatter_csv(const std::filesystem::path& path, const DenseMatrix& before, const DenseMatrix& after,
                       std::size_t limit) {
  if (before.rows() != after.rows() || before.cols() != after.cols())
    throw Error(ErrorKind::DimensionMismatch, "scatter point sets differ");
  const std::size_t count = std::min(limit, before.rows());
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return before(a, 0) < before(b, 0); });
  std::vector<std::size_t> rank(count);
  for (std::size_t i = 0; i < count; ++i) rank[order[i]] = i;

  const bool two_d = before.cols() >= 2;
  io::CsvWriter csv(path, {"index", "x_rank", "x0", "x1", "y0", "y1"});
  for (std::size_t i = 0; i < count; ++i) {
    csv.cell(i).cell(rank[i]).cell(before(i, 0)).cell(two_d ? before(i, 1) : 0.0);
    csv.cell(after(i, 0)).cell(two_d ? after(i, 1) : 0.0);
    csv.end_row();
  }
}

}  // namespace mgn::transport
