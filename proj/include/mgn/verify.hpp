#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgn/model.hpp"

namespace mgn::verify {

struct Tolerances {
  double symmetry = 1e-12;        // max |J − Jᵀ| entry
  double psd = 1e-8;              // λ_min ≥ −psd, or ≥ γ − psd
  double monotone = 1e-8;         // ⟨g(x) − g(y), x − y⟩ ≥ −monotone
  double fd_relative = 1e-5;      // ‖J − J_fd‖_F / ‖J‖_F
  double fd_step = 1e-6;
  double conservativity = 1e-6;   // |∮ g·dl| / mean ‖g‖
};

struct VerifyConfig {
  std::size_t jacobian_points = 4;  // x per model for the Jacobian suites
  std::size_t pairs = 10000;        // monotonicity pairs per model
  double box = 3.0;                 // inputs drawn from [−box, box]ⁿ
  std::size_t loop_points = 10000;
  Tolerances tol;
  std::uint64_t seed = 42;
};

struct Violation {
  std::string model_label;
  std::vector<double> x;  // empty for model-level checks
  double value = 0.0;
  std::string model_json;
};

struct SuiteResult {
  std::string name;
  std::size_t passed = 0;
  std::size_t total = 0;
  double worst = 0.0;  // in the suite's own units; see Tolerances
  std::vector<Violation> violations;  // first few only

  bool ok() const { return passed == total; }
};

struct VerifyReport {
  std::vector<SuiteResult> suites;  // constraints, symmetry, psd, monotonicity, finite_difference, conservativity
  std::size_t models = 0;
  double seconds = 0.0;

  VerifyReport();
  bool ok() const;
  SuiteResult& suite(const std::string& name);
  const SuiteResult& suite(const std::string& name) const;
  /// One "name passed/total worst=<v>" line per suite.
  std::string summary() const;
  std::string to_json() const;
  void merge(const VerifyReport& other);
};

/// Runs every suite on one model. `label` identifies it in violations.
VerifyReport verify_model(const model::Model& m, const VerifyConfig& cfg, const std::string& label,
                          std::uint64_t stream_index = 0);

/// A model with randomly drawn hyperparameters (width, depth, activations,
/// diagonal scales, γ) and i.i.d. normal parameters.
model::Model random_model(model::Architecture arch, std::size_t n, std::uint64_t seed, std::uint64_t index);

/// `count` random models per input dimension.
VerifyReport verify_random(model::Architecture arch, const std::vector<std::size_t>& dims, std::size_t count,
                           const VerifyConfig& cfg);

}  // namespace mgn::verify
