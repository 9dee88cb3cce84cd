#include "mgn/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mgn/kernels.hpp"
#include "mgn/random.hpp"

namespace mgn::model {

namespace kn = mgn::kernel;

Architecture architecture_of(const Model& m) {
  return std::holds_alternative<CmgnModel>(m) ? Architecture::Cmgn : Architecture::Mmgn;
}

std::string_view architecture_name(Architecture a) { return a == Architecture::Cmgn ? "cmgn" : "mmgn"; }

std::size_t input_dim(const Model& m) {
  return std::visit([](const auto& x) { return x.n(); }, m);
}

double gamma_of(const Model& m) {
  return std::visit([](const auto& x) { return x.gamma; }, m);
}

namespace {

void append(std::vector<double>& flat, std::vector<Segment>& layout, std::string name, std::span<const double> v) {
  layout.push_back({std::move(name), flat.size(), v.size()});
  flat.insert(flat.end(), v.begin(), v.end());
}

class Reader {
 public:
  explicit Reader(std::span<const double> flat) : flat_(flat) {}
  void into(std::span<double> dst) {
    if (pos_ + dst.size() > flat_.size()) throw Error(ErrorKind::DimensionMismatch, "flat parameter vector too short");
    std::copy_n(flat_.begin() + static_cast<std::ptrdiff_t>(pos_), dst.size(), dst.begin());
    pos_ += dst.size();
  }
  void finish() const {
    if (pos_ != flat_.size()) throw Error(ErrorKind::DimensionMismatch, "flat parameter vector too long");
  }

 private:
  std::span<const double> flat_;
  std::size_t pos_ = 0;
};

ParamView flatten_cmgn(const CmgnModel& m) {
  std::vector<double> flat;
  std::vector<Segment> layout;
  append(flat, layout, "W", m.W.span());
  for (std::size_t l = 0; l < m.biases.size(); ++l) append(flat, layout, "b_" + std::to_string(l), m.biases[l].span());
  append(flat, layout, "b_" + std::to_string(m.biases.size()), m.out_bias.span());
  append(flat, layout, "V", m.V.span());
  for (std::size_t l = 0; l < m.scale_input.size(); ++l)
    append(flat, layout, "scale_input_" + std::to_string(l), m.scale_input[l].span());
  for (std::size_t l = 0; l < m.scale_act.size(); ++l)
    append(flat, layout, "scale_act_" + std::to_string(l + 1), m.scale_act[l].span());
  return {DenseVector(std::move(flat)), std::move(layout)};
}

ParamView flatten_mmgn(const MmgnModel& m) {
  std::vector<double> flat;
  std::vector<Segment> layout;
  append(flat, layout, "a", m.a.span());
  append(flat, layout, "V", m.V.span());
  for (std::size_t k = 0; k < m.modules.size(); ++k) {
    append(flat, layout, "W_" + std::to_string(k + 1), m.modules[k].W.span());
    append(flat, layout, "b_" + std::to_string(k + 1), m.modules[k].b.span());
  }
  return {DenseVector(std::move(flat)), std::move(layout)};
}

}  // namespace

ParamView flatten(const Model& m) {
  return std::visit(
      [](const auto& x) {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, CmgnModel>)
          return flatten_cmgn(x);
        else
          return flatten_mmgn(x);
      },
      m);
}

std::size_t param_count(const Model& m) { return flatten(m).flat.size(); }

Model unflatten(const Model& shape, std::span<const double> flat) {
  Model out = shape;
  Reader r(flat);
  if (auto* c = std::get_if<CmgnModel>(&out)) {
    r.into(c->W.span());
    for (auto& b : c->biases) r.into(b.span());
    r.into(c->out_bias.span());
    r.into(c->V.span());
    for (auto& s : c->scale_input) r.into(s.span());
    for (auto& s : c->scale_act) r.into(s.span());
  } else {
    auto& mm = std::get<MmgnModel>(out);
    r.into(mm.a.span());
    r.into(mm.V.span());
    for (auto& mod : mm.modules) {
      r.into(mod.W.span());
      r.into(mod.b.span());
    }
  }
  r.finish();
  return out;
}

void validate_structure(const Model& m) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidModel, msg); };
  if (const auto* c = std::get_if<CmgnModel>(&m)) {
    const std::size_t n = c->n(), h = c->width(), L = c->layers();
    if (n == 0 || h == 0) fail("C-MGN needs n > 0 and width > 0");
    if (L == 0) fail("C-MGN needs at least one layer");
    if (c->biases.size() != L) fail("C-MGN needs one hidden bias per layer");
    for (const auto& b : c->biases)
      if (b.size() != h) fail("C-MGN hidden bias has wrong width");
    if (c->out_bias.size() != n) fail("C-MGN output bias has wrong size");
    if (c->V.cols() != n || c->V.rows() == 0) fail("C-MGN V must be r × n with r > 0");
    if (c->scale_input.size() != c->scale_act.size()) fail("C-MGN scale lists differ in length");
    if (!c->scale_input.empty()) {
      if (c->scale_input.size() != L) fail("C-MGN needs L diagonal scales per kind");
      for (std::size_t l = 0; l < L; ++l)
        if (c->scale_input[l].size() != h || c->scale_act[l].size() != h) fail("C-MGN scale has wrong width");
    }
    if (!std::isfinite(c->gamma)) fail("gamma must be finite");
  } else {
    const auto& mm = std::get<MmgnModel>(m);
    const std::size_t n = mm.n();
    if (n == 0) fail("M-MGN needs n > 0");
    if (mm.V.cols() != n || mm.V.rows() == 0) fail("M-MGN V must be r × n with r > 0");
    for (const auto& mod : mm.modules) {
      if (mod.W.cols() != n || mod.W.rows() == 0) fail("M-MGN module W must be h_k × n");
      if (mod.b.size() != mod.W.rows()) fail("M-MGN module bias has wrong width");
      if (!mod.family.prop2_eligible)
        fail("M-MGN module family '" + mod.family.name + "' lacks a convex non-negative potential");
    }
    if (!std::isfinite(mm.gamma)) fail("gamma must be finite");
  }
}

Model init_params(const ModelSpec& spec, std::uint64_t seed) {
  auto bad = [](const std::string& msg) { throw Error(ErrorKind::InvalidSpec, msg); };
  if (spec.n == 0) bad("n must be positive");
  if (!(spec.gamma >= 0.0) || !std::isfinite(spec.gamma)) bad("gamma must be finite and non-negative");
  if (spec.activations.empty()) bad("at least one activation name is required");

  std::vector<act::ActivationFamily> fams;
  try {
    for (const auto& name : spec.activations) fams.push_back(act::catalog_get(name));
  } catch (const Error& e) {
    bad(e.what());
  }

  const std::size_t n = spec.n;
  const std::size_t r = spec.rank == 0 ? n : spec.rank;
  auto gen = rng::stream(seed, "init");
  const double bound = std::sqrt(1.0 / static_cast<double>(n));
  std::uniform_real_distribution<double> uw(-bound, bound);
  auto random_matrix = [&](std::size_t rows) {
    DenseMatrix w(rows, n);
    for (double& v : w.span()) v = uw(gen);
    return w;
  };
  DenseMatrix V(r, n);
  for (std::size_t i = 0; i < std::min(r, n); ++i) V(i, i) = 1.0 / std::sqrt(static_cast<double>(n));

  auto pick = [&](std::size_t i, std::size_t count) -> const act::ActivationFamily& {
    if (fams.size() == 1) return fams[0];
    if (fams.size() != count) bad("expected 1 or " + std::to_string(count) + " activation names");
    return fams[i];
  };

  if (spec.arch == Architecture::Cmgn) {
    if (spec.width == 0) bad("width must be positive");
    if (spec.layers == 0) bad("layers must be positive");
    CmgnModel m;
    m.W = random_matrix(spec.width);
    m.biases.assign(spec.layers, DenseVector(spec.width));
    m.out_bias = DenseVector(n);
    m.V = V;
    for (std::size_t l = 0; l < spec.layers; ++l) m.activations.push_back(pick(l, spec.layers));
    if (spec.diag_scales) {
      const double unit_raw = std::log(std::expm1(1.0));  // softplus(unit_raw) = 1
      m.scale_input.assign(spec.layers, DenseVector(spec.width, unit_raw));
      m.scale_act.assign(spec.layers, DenseVector(spec.width, unit_raw));
    }
    m.gamma = spec.gamma;
    return m;
  }

  std::vector<std::size_t> widths = spec.module_widths;
  if (widths.empty()) widths.assign(spec.modules, spec.width);
  if (widths.empty()) bad("M-MGN needs at least one module");
  MmgnModel m;
  m.a = DenseVector(n);
  m.V = V;
  for (std::size_t k = 0; k < widths.size(); ++k) {
    if (widths[k] == 0) bad("module width must be positive");
    const auto& fam = pick(k, widths.size());
    if (!fam.prop2_eligible) bad("M-MGN requires a family with a convex non-negative potential, got '" + fam.name + "'");
    m.modules.push_back({random_matrix(widths[k]), DenseVector(widths[k]), fam});
  }
  m.gamma = spec.gamma;
  return m;
}

DenseVector forward(const Model& m, std::span<const double> x) {
  const ParamView pv = flatten(m);
  const kn::Layout layout = kn::layout_of(m);
  if (x.size() != kn::dim_of(layout))
    throw Error(ErrorKind::DimensionMismatch, "input has " + std::to_string(x.size()) + " entries");
  DenseVector out(x.size());
  kn::with_kernel<double>(layout, pv.flat.span(), [&](auto& k) { k.forward(x, out.span()); });
  return out;
}

DenseMatrix jacobian(const Model& m, std::span<const double> x) {
  const ParamView pv = flatten(m);
  const kn::Layout layout = kn::layout_of(m);
  const std::size_t n = kn::dim_of(layout);
  if (x.size() != n) throw Error(ErrorKind::DimensionMismatch, "input has " + std::to_string(x.size()) + " entries");
  DenseVector out(n);
  DenseMatrix jac(n, n);
  kn::with_kernel<double>(layout, pv.flat.span(), [&](auto& k) { k.forward_jacobian(x, out.span(), jac.span()); });
  return jac;
}

DenseMatrix forward_batch(const Model& m, const DenseMatrix& points) {
  const ParamView pv = flatten(m);
  const kn::Layout layout = kn::layout_of(m);
  const std::size_t n = kn::dim_of(layout);
  if (points.cols() != n) throw Error(ErrorKind::DimensionMismatch, "point set has wrong dimension");
  DenseMatrix out(points.rows(), n);
  const auto count = static_cast<std::ptrdiff_t>(points.rows());
#pragma omp parallel
  {
    kn::with_kernel<double>(layout, pv.flat.span(), [&](auto& k) {
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < count; ++i) k.forward(points.row(static_cast<std::size_t>(i)), out.row(static_cast<std::size_t>(i)));
    });
  }
  return out;
}

DenseVector invert(const Model& m, std::span<const double> y, double tol) {
  const double gamma = gamma_of(m);
  if (!(gamma > 0.0)) throw Error(ErrorKind::InvalidModel, "inversion requires gamma > 0");
  const std::size_t n = input_dim(m);
  if (y.size() != n) throw Error(ErrorKind::DimensionMismatch, "target has wrong dimension");

  const ParamView pv = flatten(m);
  const kn::Layout layout = kn::layout_of(m);
  DenseVector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / (gamma + 1.0);

  return kn::with_kernel<double>(layout, pv.flat.span(), [&](auto& k) {
    DenseVector g(n), trial(n), g_trial(n);
    DenseMatrix jac(n, n);
    auto residual = [&](const DenseVector& out) {
      DenseVector r(n);
      for (std::size_t i = 0; i < n; ++i) r[i] = out[i] - y[i];
      return r;
    };
    for (int iter = 0; iter < 200; ++iter) {
      k.forward_jacobian(x.span(), g.span(), jac.span());
      const DenseVector r = residual(g);
      if (linalg::norm_inf(r.span()) <= tol) return x;
      // J is symmetric positive definite (≥ γI), so Cholesky solves the Newton system.
      const DenseMatrix chol = linalg::cholesky(jac);
      const DenseVector w = linalg::forward_substitute(chol, r.span());
      DenseVector step(n);
      for (std::size_t ii = n; ii-- > 0;) {
        double s = w[ii];
        for (std::size_t kk = ii + 1; kk < n; ++kk) s -= chol(kk, ii) * step[kk];
        step[ii] = s / chol(ii, ii);
      }
      const double r_norm = linalg::norm2(r.span());
      double t = 1.0;
      for (int halving = 0; halving <= 30; ++halving) {
        for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] - t * step[i];
        k.forward(trial.span(), g_trial.span());
        if (linalg::norm2(residual(g_trial).span()) < r_norm) break;
        t *= 0.5;
      }
      x = trial;
    }
    k.forward(x.span(), g.span());
    if (linalg::norm_inf(residual(g).span()) <= tol) return x;
    throw Error(ErrorKind::NoConvergence, "Newton inversion did not reach tolerance in 200 iterations");
  });
}

namespace reference {

namespace {

DenseVector softplus_vec(const DenseVector& raw) {
  DenseVector s(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) s[i] = act::softplus(raw[i]);
  return s;
}

DenseVector hadamard(const DenseVector& a, const DenseVector& b) {
  DenseVector c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] * b[i];
  return c;
}

DenseVector map(const act::ActivationFamily& f, const DenseVector& z, bool derivative) {
  return act::apply_vec(f, derivative ? act::Which::Second : act::Which::First, z.span()).values;
}

struct CmgnTrace {
  std::vector<DenseVector> z;  // z_0 … z_{L-1}
  DenseVector out;
};

CmgnTrace cmgn_trace(const CmgnModel& m, std::span<const double> x) {
  const std::size_t L = m.layers();
  const DenseVector ones(m.width(), 1.0);
  auto a_scale = [&](std::size_t l) { return m.has_diag_scales() ? softplus_vec(m.scale_input[l]) : ones; };
  auto b_scale = [&](std::size_t l) { return m.has_diag_scales() ? softplus_vec(m.scale_act[l - 1]) : ones; };

  const DenseVector wx = m.W * x;
  CmgnTrace t;
  t.z.push_back(hadamard(a_scale(0), wx) + m.biases[0]);
  for (std::size_t l = 1; l < L; ++l)
    t.z.push_back(hadamard(a_scale(l), wx) + hadamard(b_scale(l), map(m.activations[l - 1], t.z.back(), false)) +
                  m.biases[l]);
  const DenseVector top = hadamard(b_scale(L), map(m.activations[L - 1], t.z.back(), false));
  t.out = linalg::transpose_times(m.W, top.span()) + linalg::gram(m.V) * x + m.out_bias +
          m.gamma * DenseVector(x);
  return t;
}

}  // namespace

DenseVector forward(const Model& m, std::span<const double> x) {
  if (x.size() != input_dim(m)) throw Error(ErrorKind::DimensionMismatch, "input has wrong dimension");
  if (const auto* c = std::get_if<CmgnModel>(&m)) return cmgn_trace(*c, x).out;
  const auto& mm = std::get<MmgnModel>(m);
  DenseVector out = mm.a + linalg::gram(mm.V) * x + mm.gamma * DenseVector(x);
  for (const auto& mod : mm.modules) {
    const DenseVector z = mod.W * x + mod.b;
    const double s = act::apply_vec(mod.family, act::Which::PotentialSum, z.span()).sum;
    out += s * linalg::transpose_times(mod.W, map(mod.family, z, false).span());
  }
  return out;
}

DenseMatrix jacobian(const Model& m, std::span<const double> x) {
  const std::size_t n = input_dim(m);
  if (x.size() != n) throw Error(ErrorKind::DimensionMismatch, "input has wrong dimension");
  const DenseMatrix gamma_i = gamma_of(m) * DenseMatrix::identity(n);

  if (const auto* c = std::get_if<CmgnModel>(&m)) {
    // J = Wᵀ (Σ_{l=1}^{L} A_{l-1} Π_{i=l}^{L} B_i J_{σ_i}(z_{i-1})) W + VᵀV + γI
    const std::size_t L = c->layers(), h = c->width();
    const CmgnTrace t = cmgn_trace(*c, x);
    std::vector<DenseMatrix> factor(L + 1);  // factor[i] = B_i J_{σ_i}(z_{i-1})
    for (std::size_t i = 1; i <= L; ++i) {
      DenseMatrix d = DenseMatrix::diagonal(map(c->activations[i - 1], t.z[i - 1], true).span());
      if (c->has_diag_scales()) d = DenseMatrix::diagonal(softplus_vec(c->scale_act[i - 1]).span()) * d;
      factor[i] = d;
    }
    DenseMatrix sum(h, h);
    DenseMatrix suffix = DenseMatrix::identity(h);
    for (std::size_t l = L; l >= 1; --l) {
      suffix = factor[l] * suffix;
      const DenseMatrix a = c->has_diag_scales() ? DenseMatrix::diagonal(softplus_vec(c->scale_input[l - 1]).span())
                                                 : DenseMatrix::identity(h);
      sum = sum + suffix * a;
    }
    return c->W.transpose() * sum * c->W + linalg::gram(c->V) + gamma_i;
  }

  const auto& mm = std::get<MmgnModel>(m);
  DenseMatrix jac = linalg::gram(mm.V) + gamma_i;
  for (const auto& mod : mm.modules) {
    const DenseVector z = mod.W * x + mod.b;
    const double s = act::apply_vec(mod.family, act::Which::PotentialSum, z.span()).sum;
    const DenseMatrix dsig = DenseMatrix::diagonal(map(mod.family, z, true).span());
    const DenseVector u = linalg::transpose_times(mod.W, map(mod.family, z, false).span());
    DenseMatrix outer(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) outer(i, j) = u[i] * u[j];
    jac = jac + s * (mod.W.transpose() * dsig * mod.W) + outer;
  }
  return jac;
}

}  // namespace reference

}  // namespace mgn::model

namespace mgn::kernel {

CmgnLayout layout_of(const model::CmgnModel& m) {
  CmgnLayout l;
  l.n = m.n();
  l.h = m.width();
  l.layers = m.layers();
  l.rank = m.rank();
  l.diag = m.has_diag_scales();
  l.gamma = m.gamma;
  for (const auto& f : m.activations) l.kinds.push_back(f.kind);
  std::size_t off = 0;
  l.off_w = off;
  off += l.h * l.n;
  l.off_b = off;
  off += l.layers * l.h;
  l.off_bl = off;
  off += l.n;
  l.off_v = off;
  off += l.rank * l.n;
  l.off_sa = off;
  if (l.diag) off += l.layers * l.h;
  l.off_sb = off;
  if (l.diag) off += l.layers * l.h;
  l.total = off;
  return l;
}

MmgnLayout layout_of(const model::MmgnModel& m) {
  MmgnLayout l;
  l.n = m.n();
  l.rank = m.rank();
  l.gamma = m.gamma;
  std::size_t off = 0;
  l.off_a = off;
  off += l.n;
  l.off_v = off;
  off += l.rank * l.n;
  for (const auto& mod : m.modules) {
    l.widths.push_back(mod.W.rows());
    l.kinds.push_back(mod.family.kind);
    l.off_w.push_back(off);
    off += mod.W.rows() * l.n;
    l.off_b.push_back(off);
    off += mod.W.rows();
  }
  l.total = off;
  return l;
}

Layout layout_of(const model::Model& m) {
  model::validate_structure(m);
  return std::visit([](const auto& x) -> Layout { return layout_of(x); }, m);
}

std::size_t dim_of(const Layout& l) {
  return std::visit([](const auto& x) { return x.n; }, l);
}

}  // namespace mgn::kernel
