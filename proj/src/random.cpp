#include "mgn/random.hpp"

namespace mgn::rng {

namespace {
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}
}  // namespace

std::mt19937_64 stream(std::uint64_t seed, std::string_view name, std::uint64_t index) {
  const std::uint64_t tag = fnv1a(name);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

linalg::DenseMatrix uniform_points(std::mt19937_64& gen, std::size_t count, std::size_t dim, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  linalg::DenseMatrix p(count, dim);
  for (double& v : p.span()) v = u(gen);
  return p;
}

linalg::DenseMatrix normal_points(std::mt19937_64& gen, std::size_t count, std::size_t dim) {
  std::normal_distribution<double> nd(0.0, 1.0);
  linalg::DenseMatrix p(count, dim);
  for (double& v : p.span()) v = nd(gen);
  return p;
}

}  // namespace mgn::rng
