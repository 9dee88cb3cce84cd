#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgn/dual.hpp"
#include "mgn/linalg.hpp"

namespace mgn::act {

enum class Kind { LogcoshTanh, SoftplusSigmoid, SoftplusOnly, TanhOnly, SigmoidOnly };

// Scalar building blocks, written once for double and every Dual<N>.

template <class T>
T softplus(const T& t) {
  using std::abs;
  using std::exp;
  using std::log1p;
  using linalg::value_of;
  // max(t, 0) + log(1 + e^{-|t|})
  const T pos = value_of(t) > 0.0 ? t : T(0.0);
  return pos + log1p(exp(-abs(t)));
}

template <class T>
T logcosh(const T& t) {
  using std::abs;
  using std::exp;
  using std::log1p;
  const T a = abs(t);
  return a + log1p(exp(-2.0 * a)) - std::numbers::ln2;
}

template <class T>
T sigmoid(const T& t) {
  using std::exp;
  using linalg::value_of;
  if (value_of(t) >= 0.0) return 1.0 / (1.0 + exp(-t));
  const T e = exp(t);
  return e / (1.0 + e);
}

/// σ(t) of the family.
template <class T>
T first(Kind kind, const T& t) {
  using std::tanh;
  switch (kind) {
    case Kind::LogcoshTanh:
    case Kind::TanhOnly: return tanh(t);
    case Kind::SoftplusSigmoid:
    case Kind::SigmoidOnly: return sigmoid(t);
    case Kind::SoftplusOnly: return softplus(t);
  }
  return T(0.0);
}

/// σ′(t) of the family; always ≥ 0.
template <class T>
T second(Kind kind, const T& t) {
  using std::tanh;
  switch (kind) {
    case Kind::LogcoshTanh:
    case Kind::TanhOnly: {
      const T th = tanh(t);
      return 1.0 - th * th;
    }
    case Kind::SoftplusSigmoid:
    case Kind::SigmoidOnly: {
      const T s = sigmoid(t);
      return s * (1.0 - s);
    }
    case Kind::SoftplusOnly: return sigmoid(t);
  }
  return T(0.0);
}

/// s(t) of a family that has an elementary potential.
template <class T>
T potential(Kind kind, const T& t) {
  switch (kind) {
    case Kind::LogcoshTanh: return logcosh(t);
    case Kind::SoftplusSigmoid: return softplus(t);
    default: break;
  }
  throw Error(ErrorKind::UnknownActivation, "family has no closed-form potential");
}

/// An element-wise activation σ, its derivative σ′, and (for the families
/// usable inside M-MGN modules) a convex non-negative potential s with σ = s′.
struct ActivationFamily {
  std::string name;
  Kind kind = Kind::LogcoshTanh;
  bool prop2_eligible = false;

  double potential(double t) const { return act::potential(kind, t); }
  double first(double t) const { return act::first(kind, t); }
  double second(double t) const { return act::second(kind, t); }

  bool operator==(const ActivationFamily& o) const { return kind == o.kind; }
};

/// Known names: logcosh_tanh, softplus_sigmoid, softplus_only, tanh_only, sigmoid_only.
ActivationFamily catalog_get(std::string_view name);
const std::vector<ActivationFamily>& catalog();

enum class Which { PotentialSum, First, Second };

struct ApplyResult {
  double sum = 0.0;           // PotentialSum
  linalg::DenseVector values;  // First / Second
};

ApplyResult apply_vec(const ActivationFamily& fam, Which which, std::span<const double> z);

}  // namespace mgn::act
