#include "mgn/activations.hpp"

#include <string>

namespace mgn::act {

const std::vector<ActivationFamily>& catalog() {
  static const std::vector<ActivationFamily> families = {
      {"logcosh_tanh", Kind::LogcoshTanh, true},
      {"softplus_sigmoid", Kind::SoftplusSigmoid, true},
      {"softplus_only", Kind::SoftplusOnly, false},
      {"tanh_only", Kind::TanhOnly, false},
      {"sigmoid_only", Kind::SigmoidOnly, false},
  };
  return families;
}

ActivationFamily catalog_get(std::string_view name) {
  for (const auto& f : catalog())
    if (f.name == name) return f;
  throw Error(ErrorKind::UnknownActivation, "'" + std::string(name) + "'");
}

ApplyResult apply_vec(const ActivationFamily& fam, Which which, std::span<const double> z) {
  ApplyResult r;
  switch (which) {
    case Which::PotentialSum:
      for (double t : z) r.sum += fam.potential(t);
      break;
    case Which::First:
      r.values = linalg::DenseVector(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) r.values[i] = fam.first(z[i]);
      break;
    case Which::Second:
      r.values = linalg::DenseVector(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) r.values[i] = fam.second(z[i]);
      break;
  }
  return r;
}

}  // namespace mgn::act
