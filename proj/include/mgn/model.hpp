#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "mgn/activations.hpp"
#include "mgn/linalg.hpp"

namespace mgn::model {

using linalg::DenseMatrix;
using linalg::DenseVector;

/// Cascaded monotone gradient network:
///   z_0 = W x + b_0
///   z_l = W x + σ_l(z_{l-1}) + b_l          l = 1 … L-1
///   g(x) = Wᵀ σ_L(z_{L-1}) + VᵀV x + b_L + γ x
/// With diagonal scalings enabled, the W x term of layer l is multiplied by
/// softplus(scale_input[l]) and σ_l's output by softplus(scale_act[l-1]).
struct CmgnModel {
  DenseMatrix W;                               // h × n, shared by every layer
  std::vector<DenseVector> biases;             // b_0 … b_{L-1}, each h
  DenseVector out_bias;                        // b_L, n
  DenseMatrix V;                               // r × n
  std::vector<act::ActivationFamily> activations;  // σ_1 … σ_L
  std::vector<DenseVector> scale_input;        // raw, L entries of h (empty when disabled)
  std::vector<DenseVector> scale_act;          // raw, L entries of h (empty when disabled)
  double gamma = 0.0;

  std::size_t n() const { return W.cols(); }
  std::size_t width() const { return W.rows(); }
  std::size_t layers() const { return activations.size(); }
  std::size_t rank() const { return V.rows(); }
  bool has_diag_scales() const { return !scale_input.empty(); }
};

struct MmgnModule {
  DenseMatrix W;  // h_k × n
  DenseVector b;  // h_k
  act::ActivationFamily family;
};

/// Modular monotone gradient network:
///   g(x) = a + VᵀV x + Σ_k s_k(W_k x + b_k) · W_kᵀ σ_k(W_k x + b_k) + γ x
struct MmgnModel {
  DenseVector a;  // n
  DenseMatrix V;  // r × n
  std::vector<MmgnModule> modules;
  double gamma = 0.0;

  std::size_t n() const { return a.size(); }
  std::size_t rank() const { return V.rows(); }
};

using Model = std::variant<CmgnModel, MmgnModel>;

enum class Architecture { Cmgn, Mmgn };

/// Everything init_params needs to build a model.
struct ModelSpec {
  Architecture arch = Architecture::Cmgn;
  std::size_t n = 2;
  std::size_t rank = 0;                 // 0 → n
  double gamma = 0.0;
  // C-MGN
  std::size_t width = 2;
  std::size_t layers = 2;
  bool diag_scales = false;
  // M-MGN; module_widths overrides modules × width when non-empty
  std::size_t modules = 2;
  std::vector<std::size_t> module_widths;
  /// One name for all layers/modules, or one per layer/module.
  std::vector<std::string> activations = {"tanh_only"};
};

Architecture architecture_of(const Model& m);
std::string_view architecture_name(Architecture a);
std::size_t input_dim(const Model& m);
double gamma_of(const Model& m);

/// Named segment of the flattened parameter vector.
struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

struct ParamView {
  DenseVector flat;
  std::vector<Segment> layout;
};

ParamView flatten(const Model& m);
std::size_t param_count(const Model& m);
/// Copy of `shape` with its trainable entries replaced by `flat`.
Model unflatten(const Model& shape, std::span<const double> flat);

/// Deterministic given (spec, seed). Throws InvalidSpec.
Model init_params(const ModelSpec& spec, std::uint64_t seed);

/// Checks structural consistency and hypotheses the architecture relies on
/// (dimensions, M-MGN families prop2-eligible). Throws InvalidModel.
void validate_structure(const Model& m);

DenseVector forward(const Model& m, std::span<const double> x);
inline DenseVector forward(const Model& m, const DenseVector& x) { return forward(m, x.span()); }
DenseMatrix jacobian(const Model& m, std::span<const double> x);
inline DenseMatrix jacobian(const Model& m, const DenseVector& x) { return jacobian(m, x.span()); }

/// Row-wise forward over a point set; OpenMP-parallel, results independent of thread count.
DenseMatrix forward_batch(const Model& m, const DenseMatrix& points);

/// Damped Newton solve of g(x) = y. Requires gamma > 0 (InvalidModel);
/// NoConvergence after 200 iterations.
DenseVector invert(const Model& m, std::span<const double> y, double tol);

// Serial, unoptimised evaluations written directly from the matrix formulas.
// Used as test oracles for the kernels.
namespace reference {
DenseVector forward(const Model& m, std::span<const double> x);
DenseMatrix jacobian(const Model& m, std::span<const double> x);
}  // namespace reference

/// Model file: JSON, format_version 1, parameters printed with 17 significant digits.
void save_model(const Model& m, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);
std::string model_to_json(const Model& m);
Model model_from_json(const std::string& text);

}  // namespace mgn::model
