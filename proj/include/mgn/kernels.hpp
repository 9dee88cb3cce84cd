#pragma once

// Evaluation kernels over a flat parameter span. The same code runs on
// doubles (plain evaluation) and on Dual<N> (forward-mode parameter
// derivatives), so every loss sees one implementation of the networks.

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "mgn/activations.hpp"
#include "mgn/dual.hpp"
#include "mgn/model.hpp"

namespace mgn::kernel {

struct CmgnLayout {
  std::size_t n = 0, h = 0, layers = 0, rank = 0;
  bool diag = false;
  double gamma = 0.0;
  std::vector<act::Kind> kinds;  // σ_1 … σ_L
  std::size_t off_w = 0, off_b = 0, off_bl = 0, off_v = 0, off_sa = 0, off_sb = 0, total = 0;
};

struct MmgnLayout {
  std::size_t n = 0, rank = 0;
  double gamma = 0.0;
  std::vector<std::size_t> widths;
  std::vector<act::Kind> kinds;
  std::vector<std::size_t> off_w, off_b;
  std::size_t off_a = 0, off_v = 0, total = 0;
};

using Layout = std::variant<CmgnLayout, MmgnLayout>;

CmgnLayout layout_of(const model::CmgnModel& m);
MmgnLayout layout_of(const model::MmgnModel& m);
Layout layout_of(const model::Model& m);
std::size_t dim_of(const Layout& l);

namespace detail {

/// Symmetric VᵀV (n × n) of the r × n block at theta[off].
template <class T>
void gram_into(std::span<const T> theta, std::size_t off, std::size_t r, std::size_t n, std::vector<T>& out) {
  out.assign(n * n, T(0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      T acc(0.0);
      for (std::size_t k = 0; k < r; ++k) acc += theta[off + k * n + i] * theta[off + k * n + j];
      out[i * n + j] = acc;
      out[j * n + i] = acc;
    }
}

/// Adds Wᵀ diag(c) W (W is h × n at theta[off]) to the upper triangle of jac.
template <class T>
void add_weighted_gram_upper(std::span<const T> theta, std::size_t off, std::size_t h, std::size_t n,
                             const std::vector<T>& c, std::vector<T>& scratch, std::span<T> jac) {
  scratch.resize(h * n);
  for (std::size_t m = 0; m < h; ++m)
    for (std::size_t i = 0; i < n; ++i) scratch[m * n + i] = c[m] * theta[off + m * n + i];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      T acc(0.0);
      for (std::size_t m = 0; m < h; ++m) acc += scratch[m * n + i] * theta[off + m * n + j];
      jac[i * n + j] += acc;
    }
}

template <class T>
void mirror_upper(std::span<T> jac, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) jac[j * n + i] = jac[i * n + j];
}

}  // namespace detail

/// C-MGN evaluator bound to one parameter vector. Holds scratch space, so
/// use one instance per thread.
template <class T>
class CmgnKernel {
 public:
  CmgnKernel(const CmgnLayout& layout, std::span<const T> theta) : l_(layout), theta_(theta) {
    detail::gram_into(theta_, l_.off_v, l_.rank, l_.n, vtv_);
    if (l_.diag) {
      scale_in_.resize(l_.layers * l_.h);
      scale_act_.resize(l_.layers * l_.h);
      for (std::size_t i = 0; i < l_.layers * l_.h; ++i) {
        scale_in_[i] = act::softplus(theta_[l_.off_sa + i]);
        scale_act_[i] = act::softplus(theta_[l_.off_sb + i]);
      }
    }
    wx_.resize(l_.h);
    z_.resize(l_.h);
    cum_.resize(l_.h);
    top_.resize(l_.h);
    coef_.resize(l_.h);
  }

  std::size_t dim() const { return l_.n; }

  void forward(std::span<const double> x, std::span<T> out) { run(x, out, {}); }

  /// Output and full symmetric Jacobian (row-major n × n).
  void forward_jacobian(std::span<const double> x, std::span<T> out, std::span<T> jac) { run(x, out, jac); }

 private:
  T a_scale(std::size_t layer, std::size_t i) const { return l_.diag ? scale_in_[layer * l_.h + i] : T(1.0); }
  // σ_l for l = 1 … L lives at index l - 1.
  T b_scale(std::size_t l, std::size_t i) const { return l_.diag ? scale_act_[(l - 1) * l_.h + i] : T(1.0); }

  void run(std::span<const double> x, std::span<T> out, std::span<T> jac) {
    const std::size_t n = l_.n, h = l_.h, L = l_.layers;
    const bool want_jac = !jac.empty();

    for (std::size_t m = 0; m < h; ++m) {
      T acc(0.0);
      for (std::size_t i = 0; i < n; ++i) acc += theta_[l_.off_w + m * n + i] * x[i];
      wx_[m] = acc;
    }
    // z_0 and the diagonal d z_0 / d(Wx).
    for (std::size_t m = 0; m < h; ++m) {
      const T a = a_scale(0, m);
      z_[m] = a * wx_[m] + theta_[l_.off_b + m];
      cum_[m] = a;
    }
    for (std::size_t l = 1; l < L; ++l) {
      const act::Kind k = l_.kinds[l - 1];
      for (std::size_t m = 0; m < h; ++m) {
        const T s = act::first(k, z_[m]);
        const T b = b_scale(l, m);
        if (want_jac) cum_[m] = a_scale(l, m) + b * act::second(k, z_[m]) * cum_[m];
        z_[m] = a_scale(l, m) * wx_[m] + b * s + theta_[l_.off_b + l * h + m];
      }
    }
    const act::Kind k_out = l_.kinds[L - 1];
    for (std::size_t m = 0; m < h; ++m) {
      const T b = b_scale(L, m);
      top_[m] = b * act::first(k_out, z_[m]);
      if (want_jac) coef_[m] = b * act::second(k_out, z_[m]) * cum_[m];
    }

    for (std::size_t i = 0; i < n; ++i) {
      T acc = theta_[l_.off_bl + i] + l_.gamma * x[i];
      for (std::size_t j = 0; j < n; ++j) acc += vtv_[i * n + j] * x[j];
      for (std::size_t m = 0; m < h; ++m) acc += theta_[l_.off_w + m * n + i] * top_[m];
      out[i] = acc;
    }

    if (want_jac) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) jac[i * n + j] = vtv_[i * n + j] + (i == j ? T(l_.gamma) : T(0.0));
      detail::add_weighted_gram_upper(theta_, l_.off_w, h, n, coef_, scratch_, jac);
      detail::mirror_upper(jac, n);
    }
  }

  const CmgnLayout& l_;
  std::span<const T> theta_;
  std::vector<T> vtv_, scale_in_, scale_act_, wx_, z_, cum_, top_, coef_, scratch_;
};

/// M-MGN evaluator bound to one parameter vector; one instance per thread.
template <class T>
class MmgnKernel {
 public:
  MmgnKernel(const MmgnLayout& layout, std::span<const T> theta) : l_(layout), theta_(theta) {
    detail::gram_into(theta_, l_.off_v, l_.rank, l_.n, vtv_);
    u_.resize(l_.n);
  }

  std::size_t dim() const { return l_.n; }

  void forward(std::span<const double> x, std::span<T> out) { run(x, out, {}); }
  void forward_jacobian(std::span<const double> x, std::span<T> out, std::span<T> jac) { run(x, out, jac); }

 private:
  void run(std::span<const double> x, std::span<T> out, std::span<T> jac) {
    const std::size_t n = l_.n;
    const bool want_jac = !jac.empty();

    for (std::size_t i = 0; i < n; ++i) {
      T acc = theta_[l_.off_a + i] + l_.gamma * x[i];
      for (std::size_t j = 0; j < n; ++j) acc += vtv_[i * n + j] * x[j];
      out[i] = acc;
    }
    if (want_jac) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) jac[i * n + j] = vtv_[i * n + j] + (i == j ? T(l_.gamma) : T(0.0));
    }

    for (std::size_t k = 0; k < l_.widths.size(); ++k) {
      const std::size_t h = l_.widths[k];
      const std::size_t ow = l_.off_w[k];
      const act::Kind kind = l_.kinds[k];
      sig_.resize(h);
      dsig_.resize(h);
      T s_sum(0.0);
      for (std::size_t m = 0; m < h; ++m) {
        T z = theta_[l_.off_b[k] + m];
        for (std::size_t i = 0; i < n; ++i) z += theta_[ow + m * n + i] * x[i];
        s_sum += act::potential(kind, z);
        sig_[m] = act::first(kind, z);
        if (want_jac) dsig_[m] = act::second(kind, z);
      }
      // u = W_kᵀ σ(z_k)
      for (std::size_t i = 0; i < n; ++i) {
        T acc(0.0);
        for (std::size_t m = 0; m < h; ++m) acc += theta_[ow + m * n + i] * sig_[m];
        u_[i] = acc;
        out[i] += s_sum * acc;
      }
      if (want_jac) {
        for (std::size_t m = 0; m < h; ++m) dsig_[m] = s_sum * dsig_[m];
        detail::add_weighted_gram_upper(theta_, ow, h, n, dsig_, scratch_, jac);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i; j < n; ++j) jac[i * n + j] += u_[i] * u_[j];
      }
    }
    if (want_jac) detail::mirror_upper(jac, n);
  }

  const MmgnLayout& l_;
  std::span<const T> theta_;
  std::vector<T> vtv_, u_, sig_, dsig_, scratch_;
};

/// Calls fn(kernel) with the kernel type matching the layout.
template <class T, class Fn>
decltype(auto) with_kernel(const Layout& layout, std::span<const T> theta, Fn&& fn) {
  return std::visit(
      [&](const auto& l) -> decltype(auto) {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, CmgnLayout>) {
          CmgnKernel<T> k(l, theta);
          return fn(k);
        } else {
          MmgnKernel<T> k(l, theta);
          return fn(k);
        }
      },
      layout);
}

}  // namespace mgn::kernel
