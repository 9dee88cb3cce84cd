#include "mgn/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "mgn/random.hpp"

namespace mgn::imaging {

namespace {

struct PngImage {
  png_image img{};
  PngImage() {
    img.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&img); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

bool has_png_signature(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  unsigned char sig[8] = {};
  const std::size_t got = std::fread(sig, 1, sizeof sig, f);
  std::fclose(f);
  return got == sizeof sig && png_sig_cmp(sig, 0, sizeof sig) == 0;
}

std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(255.0 * c + 0.5));
}

}  // namespace

PixelDataset load_image(const std::filesystem::path& path) {
  if (!has_png_signature(path)) throw Error(ErrorKind::UnsupportedFormat, path.string() + " is not a PNG file");
  PngImage png;
  if (!png_image_begin_read_from_file(&png.img, path.c_str()))
    throw Error(ErrorKind::IoError, path.string() + ": " + png.img.message);
  if (!(png.img.format & PNG_FORMAT_FLAG_COLOR))
    throw Error(ErrorKind::UnsupportedFormat, path.string() + " is greyscale");
  if (png.img.format & PNG_FORMAT_FLAG_LINEAR)
    throw Error(ErrorKind::UnsupportedFormat, path.string() + " is not 8 bits per channel");

  // Read with alpha so libpng does not composite; the alpha byte is then dropped.
  png.img.format = PNG_FORMAT_RGBA;
  const std::size_t w = png.img.width, h = png.img.height;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png.img));
  if (!png_image_finish_read(&png.img, nullptr, buf.data(), 0, nullptr))
    throw Error(ErrorKind::IoError, path.string() + ": " + png.img.message);

  PixelDataset out{DenseMatrix(w * h, 3), w, h};
  for (std::size_t p = 0; p < w * h; ++p)
    for (std::size_t c = 0; c < 3; ++c) out.pixels(p, c) = static_cast<double>(buf[4 * p + c]) / 255.0;
  return out;
}

void save_image(const PixelDataset& image, const std::filesystem::path& path) {
  if (image.pixels.cols() != 3 || image.pixels.rows() != image.width * image.height)
    throw Error(ErrorKind::DimensionMismatch, "pixel count does not match image size");
  std::vector<std::uint8_t> buf(image.pixels.span().size());
  std::transform(image.pixels.span().begin(), image.pixels.span().end(), buf.begin(), to_byte);
  PngImage png;
  png.img.width = static_cast<png_uint_32>(image.width);
  png.img.height = static_cast<png_uint_32>(image.height);
  png.img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png.img, path.c_str(), 0, buf.data(), 0, nullptr))
    throw Error(ErrorKind::IoError, path.string() + ": " + png.img.message);
}

DenseMatrix map_pixels(const model::Model& m, const PixelDataset& image) {
  if (model::input_dim(m) != 3) throw Error(ErrorKind::DimensionMismatch, "pixel map must have n = 3");
  return model::forward_batch(m, image.pixels);
}

double mapped_kl(const model::Model& m, const transport::GaussianModel& target, const PixelDataset& image) {
  return transport::kl_divergence(transport::fit_gaussian(map_pixels(m, image)), target);
}

AdaptationResult adapt_train(const PixelDataset& source, const PixelDataset& target, const model::ModelSpec& spec,
                             const AdaptConfig& cfg) {
  if (spec.n != 3) throw Error(ErrorKind::InvalidSpec, "pixel map must have n = 3");
  if (!(spec.gamma > 0.0)) throw Error(ErrorKind::InvalidSpec, "pixel flows need gamma > 0");
  transport::GaussianModel tgt = transport::fit_gaussian(target.pixels);

  // Seeded subsample of the source pixels, kept in image order.
  std::vector<std::size_t> rows(source.count());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (rows.size() > cfg.max_pixels) {
    auto gen = rng::stream(cfg.seed, "pixels");
    std::shuffle(rows.begin(), rows.end(), gen);
    rows.resize(cfg.max_pixels);
    std::sort(rows.begin(), rows.end());
  }
  train::Dataset ds{DenseMatrix(rows.size(), 3), std::nullopt};
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(source.pixels.row(rows[i]).begin(), 3, ds.inputs.row(i).begin());

  const train::GaussianNllLoss loss{tgt.mean(), tgt.chol()};
  std::vector<double> epoch_kl;
  auto on_epoch = [&](std::size_t, const model::Model& m, double) { epoch_kl.push_back(mapped_kl(m, tgt, source)); };

  train::TrainConfig tc = cfg.train;
  tc.loss = train::LossKind::FlowNll;
  tc.seed = cfg.seed;
  auto trained = train::train(model::init_params(spec, cfg.seed), ds, loss, tc, on_epoch);

  AdaptationResult r{std::move(trained.model), tgt, 0.0, 0.0, std::move(epoch_kl), std::move(trained.report)};
  r.train_nll = train::batch_loss(r.model, loss, train::Batch::all(ds.inputs));
  r.kl = mapped_kl(r.model, tgt, source);
  return r;
}

AppliedImage adapt_apply(const model::Model& m, const transport::GaussianModel& target, const PixelDataset& image) {
  const DenseMatrix mapped = map_pixels(m, image);
  AppliedImage out{PixelDataset{mapped, image.width, image.height}, std::numeric_limits<double>::infinity()};
  // Colours collapsed onto a lower-dimensional set have no density: KL stays infinite.
  try {
    out.kl = transport::kl_divergence(transport::fit_gaussian(mapped), target);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateData) throw;
  }
  for (double& v : out.image.pixels.span()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

std::string AdaptationResult::to_json() const {
  nlohmann::ordered_json j;
  j["architecture"] = model::architecture_name(model::architecture_of(model));
  j["train_nll"] = train_nll;
  j["kl"] = kl;
  j["epoch_kl"] = epoch_kl;
  j["target_mean"] = target.mean().values();
  j["target_covariance"] = target.covariance().values();
  j["train_seconds"] = train_report.seconds;
  j["epoch_losses"] = train_report.epoch_losses;
  return j.dump(2) + "\n";
}

}  // namespace mgn::imaging
