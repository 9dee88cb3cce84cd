#include "mgn/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "mgn/gradfield.hpp"
#include "mgn/io.hpp"
#include "mgn/random.hpp"

namespace mgn::verify {

using linalg::DenseMatrix;
using linalg::DenseVector;

namespace {

constexpr std::size_t kKeepViolations = 3;

const char* const kSuites[] = {"constraints", "symmetry", "psd", "monotonicity", "finite_difference",
                               "conservativity"};

// Tallies one check. `worst` tracks the largest badness seen; `bad` decides pass/fail.
void record(SuiteResult& s, bool bad, double badness, const model::Model& m, const std::string& label,
            std::span<const double> x, double value) {
  ++s.total;
  s.worst = std::max(s.worst, badness);
  if (!bad) {
    ++s.passed;
    return;
  }
  if (s.violations.size() < kKeepViolations)
    s.violations.push_back({label, std::vector<double>(x.begin(), x.end()), value, model::model_to_json(m)});
}

DenseMatrix fd_jacobian(const model::Model& m, std::span<const double> x, double h) {
  const std::size_t n = x.size();
  DenseMatrix J(n, n);
  std::vector<double> xp(x.begin(), x.end());
  for (std::size_t j = 0; j < n; ++j) {
    xp[j] = x[j] + h;
    const DenseVector gp = model::forward(m, xp);
    xp[j] = x[j] - h;
    const DenseVector gm = model::forward(m, xp);
    xp[j] = x[j];
    for (std::size_t i = 0; i < n; ++i) J(i, j) = (gp[i] - gm[i]) / (2.0 * h);
  }
  return J;
}

}  // namespace

VerifyReport::VerifyReport() {
  for (const char* name : kSuites) {
    SuiteResult s;
    s.name = name;
    suites.push_back(std::move(s));
  }
}

bool VerifyReport::ok() const {
  return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.ok(); });
}

SuiteResult& VerifyReport::suite(const std::string& name) {
  for (auto& s : suites)
    if (s.name == name) return s;
  throw Error(ErrorKind::InvalidSpec, "no suite named " + name);
}

const SuiteResult& VerifyReport::suite(const std::string& name) const {
  return const_cast<VerifyReport*>(this)->suite(name);
}

std::string VerifyReport::summary() const {
  std::ostringstream os;
  for (const auto& s : suites)
    os << s.name << ' ' << s.passed << '/' << s.total << " worst=" << io::fmt17(s.worst) << '\n';
  return os.str();
}

std::string VerifyReport::to_json() const {
  nlohmann::ordered_json j;
  j["ok"] = ok();
  j["models"] = models;
  j["seconds"] = seconds;
  auto& arr = j["suites"] = nlohmann::ordered_json::array();
  for (const auto& s : suites) {
    nlohmann::ordered_json e;
    e["name"] = s.name;
    e["passed"] = s.passed;
    e["total"] = s.total;
    e["worst"] = s.worst;
    auto& vs = e["violations"] = nlohmann::ordered_json::array();
    for (const auto& v : s.violations)
      vs.push_back({{"model", v.model_label}, {"x", v.x}, {"value", v.value},
                    {"model_file", nlohmann::ordered_json::parse(v.model_json)}});
    arr.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

void VerifyReport::merge(const VerifyReport& other) {
  for (const auto& o : other.suites) {
    SuiteResult& s = suite(o.name);
    s.passed += o.passed;
    s.total += o.total;
    s.worst = std::max(s.worst, o.worst);
    for (const auto& v : o.violations)
      if (s.violations.size() < kKeepViolations) s.violations.push_back(v);
  }
  models += other.models;
  seconds += other.seconds;
}

VerifyReport verify_model(const model::Model& m, const VerifyConfig& cfg, const std::string& label,
                          std::uint64_t stream_index) {
  const auto t0 = std::chrono::steady_clock::now();
  VerifyReport rep;
  rep.models = 1;
  const Tolerances& tol = cfg.tol;
  const std::size_t n = model::input_dim(m);
  const double gamma = model::gamma_of(m);

  // γ is the only constraint a stored model can break: diagonal scales are
  // positive by construction and structure is checked on load.
  record(rep.suite("constraints"), !(gamma >= 0.0), std::max(0.0, -gamma), m, label, {}, gamma);

  auto gen = rng::stream(cfg.seed, "verify", stream_index);
  const DenseMatrix xs = rng::uniform_points(gen, cfg.jacobian_points, n, -cfg.box, cfg.box);
  for (std::size_t p = 0; p < xs.rows(); ++p) {
    const auto x = xs.row(p);
    const DenseMatrix J = model::jacobian(m, x);

    const double asym = J.asymmetry();
    record(rep.suite("symmetry"), !(asym <= tol.symmetry), asym, m, label, x, asym);

    // Symmetrize before the eigensolver so a symmetry failure does not mask this one.
    const DenseMatrix Js = 0.5 * (J + J.transpose());
    const double lmin = linalg::sym_eigen(Js).values[0];
    const double floor = (gamma > 0.0 ? gamma : 0.0) - tol.psd;
    record(rep.suite("psd"), !(lmin >= floor), std::max(0.0, floor + tol.psd - lmin), m, label, x, lmin);

    const DenseMatrix Jfd = fd_jacobian(m, x, tol.fd_step);
    const double scale = std::max(J.frobenius(), 1e-300);
    const double rel = (J - Jfd).frobenius() / scale;
    record(rep.suite("finite_difference"), !(rel <= tol.fd_relative), rel, m, label, x, rel);
  }

  const DenseMatrix xa = rng::uniform_points(gen, cfg.pairs, n, -cfg.box, cfg.box);
  const DenseMatrix xb = rng::uniform_points(gen, cfg.pairs, n, -cfg.box, cfg.box);
  const DenseMatrix ga = model::forward_batch(m, xa);
  const DenseMatrix gb = model::forward_batch(m, xb);
  for (std::size_t p = 0; p < cfg.pairs; ++p) {
    double ip = 0.0;
    for (std::size_t i = 0; i < n; ++i) ip += (ga(p, i) - gb(p, i)) * (xa(p, i) - xb(p, i));
    record(rep.suite("monotonicity"), !(ip >= -tol.monotone), std::max(0.0, -ip), m, label, xa.row(p), ip);
  }

  if (n >= 2) {
    const auto loop = gradfield::loop_integral(m, cfg.loop_points);
    const double rel = std::abs(loop.circulation) / std::max(loop.mean_norm, 1e-300);
    record(rep.suite("conservativity"), !(rel <= tol.conservativity), rel, m, label, {}, loop.circulation);
  }

  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

model::Model random_model(model::Architecture arch, std::size_t n, std::uint64_t seed, std::uint64_t index) {
  auto gen = rng::stream(seed, "random_model", index);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(gen); };
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  model::ModelSpec spec;
  spec.arch = arch;
  spec.n = n;
  spec.rank = pick(1, n);
  spec.gamma = unit(gen) < 0.5 ? 0.0 : 0.05 + 0.95 * unit(gen);
  spec.activations.clear();
  std::vector<std::string> eligible;
  for (const auto& f : act::catalog())
    if (arch == model::Architecture::Cmgn || f.prop2_eligible) eligible.push_back(f.name);

  std::size_t slots = 0;
  if (arch == model::Architecture::Cmgn) {
    spec.width = pick(1, 6);
    spec.layers = slots = pick(1, 3);
    spec.diag_scales = unit(gen) < 0.5;
  } else {
    spec.modules = slots = pick(1, 3);
    for (std::size_t k = 0; k < slots; ++k) spec.module_widths.push_back(pick(1, 6));
  }
  for (std::size_t k = 0; k < slots; ++k) spec.activations.push_back(eligible[pick(0, eligible.size() - 1)]);

  model::Model m = model::init_params(spec, seed ^ index);
  std::vector<double> flat = model::flatten(m).flat.values();
  std::normal_distribution<double> normal(0.0, 0.5);
  for (double& v : flat) v = normal(gen);
  return model::unflatten(m, flat);
}

VerifyReport verify_random(model::Architecture arch, const std::vector<std::size_t>& dims, std::size_t count,
                           const VerifyConfig& cfg) {
  VerifyReport rep;
  std::uint64_t index = 0;
  for (std::size_t n : dims)
    for (std::size_t k = 0; k < count; ++k, ++index) {
      const model::Model m = random_model(arch, n, cfg.seed, index);
      const std::string label = std::string(model::architecture_name(arch)) + " n=" + std::to_string(n) + " #" +
                                std::to_string(k);
      rep.merge(verify_model(m, cfg, label, index));
    }
  return rep;
}

}  // namespace mgn::verify
