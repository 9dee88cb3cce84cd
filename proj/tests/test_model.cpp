#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "mgn/io.hpp"
#include "mgn/model.hpp"

using namespace mgn::model;
using mgn::ErrorKind;
using mgn::linalg::DenseMatrix;
using mgn::linalg::DenseVector;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const mgn::Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::ConfigError;
}

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "mgn_test_model";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::vector<ModelSpec> spec_grid(std::size_t n) {
  std::vector<ModelSpec> out;
  for (const auto& fam : mgn::act::catalog()) {
    for (bool diag : {false, true})
      for (double gamma : {0.0, 0.3}) {
        ModelSpec s;
        s.arch = Architecture::Cmgn;
        s.n = n;
        s.width = 3;
        s.layers = 3;
        s.diag_scales = diag;
        s.gamma = gamma;
        s.activations = {fam.name};
        out.push_back(s);
      }
    if (!fam.prop2_eligible) continue;
    for (double gamma : {0.0, 0.3}) {
      ModelSpec s;
      s.arch = Architecture::Mmgn;
      s.n = n;
      s.module_widths = {2, 3};
      s.gamma = gamma;
      s.rank = std::max<std::size_t>(1, n / 2);
      s.activations = {fam.name};
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("C-MGN forward examples") {
  CmgnModel m = testing::zero_cmgn(2, 2, 2);
  m.V = DenseMatrix::identity(2);
  CHECK(forward(m, DenseVector{1, 2}) == DenseVector{1, 2});
  CHECK(jacobian(m, DenseVector{0.3, -7}) == DenseMatrix::identity(2));

  CmgnModel c = testing::zero_cmgn(2, 2, 2);
  c.out_bias = DenseVector{3, 4};
  CHECK(forward(c, DenseVector{-5, 9}) == DenseVector{3, 4});

  CmgnModel s = testing::zero_cmgn(1, 1, 1);
  s.W(0, 0) = 1.0;
  CHECK(forward(s, DenseVector{0.5})[0] == doctest::Approx(0.46212).epsilon(1e-5));
  CHECK(forward(s, DenseVector{0.5})[0] == doctest::Approx(std::tanh(0.5)).epsilon(1e-15));
}

TEST_CASE("C-MGN scalar jacobian matches the hand chain rule") {
  for (double w : {-2.0, 0.5, 1.5})
    for (double b : {-0.3, 0.0, 0.7})
      for (double x : {-1.0, 0.2, 2.0}) {
        CmgnModel s = testing::zero_cmgn(1, 1, 1);
        s.W(0, 0) = w;
        s.biases[0][0] = b;
        const double th = std::tanh(w * x + b);
        CHECK(jacobian(s, DenseVector{x})(0, 0) == doctest::Approx(w * w * (1 - th * th)).epsilon(1e-14));
      }
}

TEST_CASE("M-MGN forward and jacobian examples") {
  MmgnModel m = testing::zero_mmgn(2, {});
  m.V = DenseMatrix::identity(2);
  CHECK(forward(m, DenseVector{-1, 3}) == DenseVector{-1, 3});
  CHECK(jacobian(m, DenseVector{-1, 3}) == DenseMatrix::identity(2));

  MmgnModel s = testing::zero_mmgn(1, {1});
  s.modules[0].W(0, 0) = 1.0;
  const double lc = std::log(std::cosh(1.0)), th = std::tanh(1.0);
  CHECK(forward(s, DenseVector{1.0})[0] == doctest::Approx(lc * th).epsilon(1e-14));
  CHECK(forward(s, DenseVector{1.0})[0] == doctest::Approx(0.330365).epsilon(1e-6));
  CHECK(jacobian(s, DenseVector{1.0})(0, 0) == doctest::Approx(lc * (1 - th * th) + th * th).epsilon(1e-14));
  CHECK(jacobian(s, DenseVector{1.0})(0, 0) == doctest::Approx(0.762202).epsilon(1e-6));
}

TEST_CASE("M-MGN bias is additive") {
  ModelSpec spec;
  spec.arch = Architecture::Mmgn;
  spec.n = 3;
  spec.module_widths = {2, 2};
  spec.activations = {"logcosh_tanh"};
  auto base = std::get<MmgnModel>(testing::randomized(spec, 3));
  MmgnModel shifted = base;
  base.a = DenseVector(3);
  shifted.a = DenseVector{0.25, -1.5, 3.0};
  const DenseVector x{0.1, -0.4, 0.9};
  const DenseVector diff = forward(shifted, x) - forward(base, x);
  CHECK(testing::max_abs_diff(diff, shifted.a) <= 1e-14);
}

TEST_CASE("kernels agree with the reference evaluation") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uint64_t seed = 100;
  for (std::size_t n : {1u, 2u, 5u})
    for (const ModelSpec& spec : spec_grid(n)) {
      const Model m = testing::randomized(spec, ++seed);
      for (int rep = 0; rep < 3; ++rep) {
        std::vector<double> x(n);
        for (double& v : x) v = u(gen);
        const DenseVector g = forward(m, x), gr = reference::forward(m, x);
        const DenseMatrix J = jacobian(m, x), Jr = reference::jacobian(m, x);
        CHECK(testing::max_abs_diff(g, gr) <= 1e-12 * (1 + mgn::linalg::norm_inf(gr.span())));
        CHECK(testing::max_abs_diff(J, Jr) <= 1e-12 * (1 + J.frobenius()));
        CHECK(J.asymmetry() <= 1e-12);
      }
    }
}

TEST_CASE("jacobian matches central differences") {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uint64_t seed = 500;
  for (std::size_t n : {1u, 2u, 5u})
    for (const ModelSpec& spec : spec_grid(n)) {
      const Model m = testing::randomized(spec, ++seed);
      std::vector<double> x(n);
      for (double& v : x) v = u(gen);
      const DenseMatrix J = jacobian(m, x);
      DenseMatrix fd(n, n);
      const double h = 1e-6;
      for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        const DenseVector gp = forward(m, xp), gm = forward(m, xm);
        for (std::size_t i = 0; i < n; ++i) fd(i, j) = (gp[i] - gm[i]) / (2 * h);
      }
      CHECK((J - fd).frobenius() <= 1e-5 * std::max(J.frobenius(), 1e-12));
    }
}

TEST_CASE("forward_batch equals row-wise forward") {
  ModelSpec spec;
  spec.arch = Architecture::Cmgn;
  spec.n = 4;
  spec.width = 5;
  spec.layers = 2;
  spec.diag_scales = true;
  const Model m = testing::randomized(spec, 9);
  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd;
  DenseMatrix pts(257, 4);
  for (double& v : pts.span()) v = nd(gen);
  const DenseMatrix out = forward_batch(m, pts);
  for (std::size_t r = 0; r < pts.rows(); ++r) {
    const DenseVector g = forward(m, pts.row(r));
    for (std::size_t i = 0; i < 4; ++i) CHECK(out(r, i) == g[i]);
  }
}

TEST_CASE("dimension mismatch is reported") {
  const Model m = testing::zero_cmgn(2, 2, 2);
  CHECK(kind_of([&] { forward(m, DenseVector{1, 2, 3}); }) == ErrorKind::DimensionMismatch);
  CHECK(kind_of([&] { jacobian(m, DenseVector{1}); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("invert round trips") {
  MmgnModel id = testing::zero_mmgn(3, {});
  id.gamma = 1.0;
  const std::vector<double> y{0.5, -2.0, 7.0};
  const DenseVector x = invert(id, y, 1e-12);
  for (std::size_t i = 0; i < 3; ++i) CHECK(x[i] == doctest::Approx(y[i]).epsilon(1e-12));

  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uint64_t seed = 900;
  for (std::size_t n : {1u, 2u, 5u})
    for (ModelSpec spec : spec_grid(n)) {
      spec.gamma = 0.1;
      const Model m = testing::randomized(spec, ++seed);
      std::vector<double> target(n);
      for (double& v : target) v = u(gen);
      const DenseVector sol = invert(m, target, 1e-9);
      CHECK(mgn::linalg::norm_inf((forward(m, sol) - DenseVector(target)).span()) <= 1e-9);
      const std::vector<double> zero(n, 0.0);
      const DenseVector z = invert(m, zero, 1e-10);
      CHECK(mgn::linalg::norm_inf(forward(m, z).span()) <= 1e-10);
    }

  const Model flat = testing::zero_cmgn(2, 2, 2);
  CHECK(kind_of([&] { invert(flat, std::vector<double>{1, 1}, 1e-8); }) == ErrorKind::InvalidModel);
}

TEST_CASE("init_params") {
  ModelSpec c;
  c.arch = Architecture::Cmgn;
  c.n = 2;
  c.width = 2;
  c.layers = 2;
  c.rank = 2;
  CHECK(param_count(init_params(c, 1)) == 14);

  ModelSpec m;
  m.arch = Architecture::Mmgn;
  m.n = 2;
  m.rank = 1;
  m.module_widths = {2, 2, 2};
  m.activations = {"softplus_sigmoid"};
  CHECK(param_count(init_params(m, 1)) == 22);

  CHECK(flatten(init_params(c, 5)).flat == flatten(init_params(c, 5)).flat);
  CHECK_FALSE(flatten(init_params(c, 5)).flat == flatten(init_params(c, 6)).flat);

  const auto cm = std::get<CmgnModel>(init_params(c, 3));
  const double bound = std::sqrt(0.5);
  for (double w : cm.W.span()) CHECK(std::abs(w) <= bound);
  for (const auto& b : cm.biases)
    for (double v : b) CHECK(v == 0.0);
  CHECK(testing::max_abs_diff(cm.V, std::sqrt(0.5) * DenseMatrix::identity(2)) <= 1e-15);

  ModelSpec d = c;
  d.diag_scales = true;
  const auto dm = std::get<CmgnModel>(init_params(d, 3));
  for (const auto& s : dm.scale_input)
    for (double v : s) CHECK(mgn::act::softplus(v) == doctest::Approx(1.0).epsilon(1e-14));

  ModelSpec bad = c;
  bad.layers = 0;
  CHECK(kind_of([&] { init_params(bad, 1); }) == ErrorKind::InvalidSpec);
  bad = c;
  bad.activations = {"relu"};
  CHECK(kind_of([&] { init_params(bad, 1); }) == ErrorKind::InvalidSpec);
  bad = m;
  bad.activations = {"tanh_only"};
  CHECK(kind_of([&] { init_params(bad, 1); }) == ErrorKind::InvalidSpec);
}

TEST_CASE("flatten and unflatten are inverse") {
  for (const ModelSpec& spec : spec_grid(3)) {
    const Model m = testing::randomized(spec, 77);
    const ParamView v = flatten(m);
    CHECK(v.flat.size() == param_count(m));
    std::size_t covered = 0;
    for (const auto& seg : v.layout) {
      CHECK(seg.offset == covered);
      covered += seg.size;
    }
    CHECK(covered == v.flat.size());
    CHECK(flatten(unflatten(m, v.flat.span())).flat == v.flat);
  }
}

TEST_CASE("model files round trip bit-exactly") {
  std::uint64_t seed = 1;
  for (const ModelSpec& spec : spec_grid(3)) {
    const Model m = testing::randomized(spec, ++seed);
    const auto path = temp_file("round.json");
    save_model(m, path);
    const Model back = load_model(path);
    CHECK(architecture_of(back) == architecture_of(m));
    CHECK(gamma_of(back) == gamma_of(m));
    CHECK(flatten(back).flat == flatten(m).flat);
    CHECK(model_to_json(back) == model_to_json(m));
  }
}

TEST_CASE("malformed model files raise FormatError") {
  ModelSpec spec;
  spec.arch = Architecture::Mmgn;
  spec.n = 2;
  spec.activations = {"logcosh_tanh"};
  const std::string text = model_to_json(init_params(spec, 1));

  const auto truncated = temp_file("truncated.json");
  mgn::io::write_text(truncated, text.substr(0, text.size() / 2));
  CHECK(kind_of([&] { load_model(truncated); }) == ErrorKind::FormatError);

  std::string unknown = text;
  const auto pos = unknown.find("logcosh_tanh");
  REQUIRE(pos != std::string::npos);
  unknown.replace(pos, 12, "relu");
  CHECK(kind_of([&] { model_from_json(unknown); }) == ErrorKind::FormatError);

  std::string version = text;
  const auto vp = version.find("\"format_version\": 1");
  REQUIRE(vp != std::string::npos);
  version.replace(vp, 19, "\"format_version\": 2");
  CHECK(kind_of([&] { model_from_json(version); }) == ErrorKind::FormatError);

  CHECK(kind_of([] { load_model("/nonexistent/model.json"); }) == ErrorKind::IoError);
}
