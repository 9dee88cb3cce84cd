#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "mgn/linalg.hpp"

namespace mgn::rng {

/// Independent generator for a named stage ("data", "init", "shuffle", …) of
/// a run. Changing how one stage consumes randomness leaves the others alone.
std::mt19937_64 stream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

/// count × dim matrix of i.i.d. U[lo, hi) draws.
linalg::DenseMatrix uniform_points(std::mt19937_64& gen, std::size_t count, std::size_t dim, double lo = 0.0,
                                   double hi = 1.0);

/// count × dim matrix of i.i.d. standard normal draws.
linalg::DenseMatrix normal_points(std::mt19937_64& gen, std::size_t count, std::size_t dim);

}  // namespace mgn::rng
