#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mgn/linalg.hpp"
#include "mgn/model.hpp"
#include "mgn/training.hpp"
#include "mgn/transport.hpp"

namespace mgn::imaging {

using linalg::DenseMatrix;

/// Pixel colours as rows of (r, g, b) in [0, 1], row-major over the image.
struct PixelDataset {
  DenseMatrix pixels;
  std::size_t width = 0;
  std::size_t height = 0;

  std::size_t count() const { return pixels.rows(); }
};

/// 8-bit RGB or RGBA PNG (alpha dropped, palettes expanded). Grey and
/// 16-bit images raise UnsupportedFormat; unreadable or truncated files IoError.
PixelDataset load_image(const std::filesystem::path& path);

/// 8-bit RGB PNG, byte = floor(255·clamp(v, 0, 1) + 0.5).
void save_image(const PixelDataset& image, const std::filesystem::path& path);

struct AdaptConfig {
  std::size_t max_pixels = 100000;
  train::TrainConfig train;
  std::uint64_t seed = 42;
};

struct AdaptationResult {
  model::Model model;
  transport::GaussianModel target;
  double train_nll = 0.0;
  double kl = 0.0;                // KL(fit(g(source)) ‖ target)
  std::vector<double> epoch_kl;   // same metric after every epoch
  train::TrainReport train_report;

  std::string to_json() const;
};

/// Fits the target Gaussian and trains `spec` to push source pixel colours onto it.
/// Requires spec.n = 3 and spec.gamma > 0.
AdaptationResult adapt_train(const PixelDataset& source, const PixelDataset& target, const model::ModelSpec& spec,
                             const AdaptConfig& cfg);

/// g(x) for every pixel, unclamped.
DenseMatrix map_pixels(const model::Model& m, const PixelDataset& image);

/// KL(fit(g(image)) ‖ target).
double mapped_kl(const model::Model& m, const transport::GaussianModel& target, const PixelDataset& image);

struct AppliedImage {
  PixelDataset image;  // clamped to [0, 1]
  double kl = 0.0;     // KL of the unclamped mapped colours against the target
};

AppliedImage adapt_apply(const model::Model& m, const transport::GaussianModel& target, const PixelDataset& image);

}  // namespace mgn::imaging
