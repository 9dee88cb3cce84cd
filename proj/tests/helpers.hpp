#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mgn/activations.hpp"
#include "mgn/linalg.hpp"
#include "mgn/model.hpp"

namespace testing {

using mgn::linalg::DenseMatrix;
using mgn::linalg::DenseVector;

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.span().size(); ++i) m = std::max(m, std::abs(a.span()[i] - b.span()[i]));
  return m;
}

inline double max_abs_diff(const DenseVector& a, const DenseVector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline DenseMatrix random_spd(std::mt19937_64& gen, std::size_t n, double shift = 0.5) {
  std::normal_distribution<double> nd(0.0, 1.0);
  DenseMatrix a(n, n);
  for (double& v : a.span()) v = nd(gen);
  DenseMatrix s = mgn::linalg::gram(a);
  for (std::size_t i = 0; i < n; ++i) s(i, i) += shift;
  return s;
}

/// Hand-built C-MGN with every parameter zero, V = 0 and gamma = 0.
inline mgn::model::CmgnModel zero_cmgn(std::size_t n, std::size_t h, std::size_t layers,
                                       const std::string& act = "tanh_only") {
  mgn::model::CmgnModel m;
  m.W = DenseMatrix(h, n);
  m.biases.assign(layers, DenseVector(h));
  m.out_bias = DenseVector(n);
  m.V = DenseMatrix(n, n);
  m.activations.assign(layers, mgn::act::catalog_get(act));
  return m;
}

inline mgn::model::MmgnModel zero_mmgn(std::size_t n, std::vector<std::size_t> widths,
                                       const std::string& act = "logcosh_tanh") {
  mgn::model::MmgnModel m;
  m.a = DenseVector(n);
  m.V = DenseMatrix(n, n);
  for (std::size_t h : widths) m.modules.push_back({DenseMatrix(h, n), DenseVector(h), mgn::act::catalog_get(act)});
  return m;
}

/// init_params followed by N(0, scale²) draws for every trainable entry.
inline mgn::model::Model randomized(const mgn::model::ModelSpec& spec, std::uint64_t seed, double scale = 0.5) {
  mgn::model::Model m = mgn::model::init_params(spec, seed);
  std::vector<double> flat = mgn::model::flatten(m).flat.values();
  std::mt19937_64 gen(seed * 7919 + 17);
  std::normal_distribution<double> nd(0.0, scale);
  for (double& v : flat) v = nd(gen);
  return mgn::model::unflatten(m, flat);
}

}  // namespace testing
