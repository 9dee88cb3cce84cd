#include "commands.hpp"

#include <cstdio>
#include <ostream>

#include "mgn/gradfield.hpp"
#include "mgn/imaging.hpp"
#include "mgn/io.hpp"
#include "mgn/transport.hpp"
#include "mgn/verify.hpp"

namespace mgn::cli {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); }

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::uint64_t seed_of(const Json& cfg) { return cfg.at("seed").get<std::uint64_t>(); }

// Training failures still leave the epochs that did finish on disk.
template <class F>
auto keep_partial(const fs::path& loss_csv, F&& body) {
  try {
    return body();
  } catch (const train::TrainingAborted& e) {
    e.report().write_loss_csv(loss_csv);
    throw;
  }
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidSpec:
    case ErrorKind::UnknownActivation:
    case ErrorKind::IoError:
    case ErrorKind::FormatError:
    case ErrorKind::UnsupportedFormat:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::DegenerateData:
    case ErrorKind::InvalidModel:
      return kConfigError;
    default:
      return kRuntimeError;
  }
}

int cmd_gradfield(const Json& cfg, const fs::path& dir, std::ostream& out) {
  gradfield::GradFieldConfig gc;
  gc.seed = seed_of(cfg);
  gc.samples = cfg.at("experiment").at("samples").get<std::size_t>();
  if (gc.samples == 0) fail("experiment.samples must be positive");
  gc.train = train_config_from(cfg.at("train"), gc.seed);
  const model::ModelSpec spec = model_spec_from(cfg.at("model"), 2);
  model::validate_structure(model::init_params(spec, gc.seed));

  const auto r = keep_partial(dir / "train_loss.csv", [&] { return gradfield::run_gradfield(spec, gc); });
  model::save_model(r.model, dir / "model.json");
  r.train_report.write_loss_csv(dir / "train_loss.csv");
  gradfield::write_error_pgm(dir / "error_map.pgm", r);
  gradfield::write_error_csv(dir / "error.csv", r);
  gradfield::write_quiver_csv(dir / "quiver.csv", r);
  io::write_text(dir / "train_report.json", r.train_report.to_json());
  out << "mse_db=" << fixed(r.mse_db, 4) << " params=" << r.param_count << '\n';
  return kOk;
}

int cmd_coupling(const Json& cfg, const fs::path& dir, std::ostream& out) {
  const Json& ex = cfg.at("experiment");
  const std::size_t d = ex.at("d").get<std::size_t>();
  if (d == 0) fail("experiment.d must be positive");
  transport::CouplingConfig cc;
  cc.seed = seed_of(cfg);
  cc.train_samples = ex.at("train_samples").get<std::size_t>();
  cc.test_samples = ex.at("test_samples").get<std::size_t>();
  cc.train = train_config_from(cfg.at("train"), cc.seed);
  const auto methods = ex.at("methods").get<std::vector<std::string>>();
  if (methods.empty()) fail("experiment.methods is empty");
  for (const auto& m : methods)
    if (m != "cmgn" && m != "mmgn" && m != "whitening") fail("unknown coupling method '" + m + "'");

  const transport::GaussianModel data =
      transport::random_gaussian(d, ex.at("data_seed").get<std::uint64_t>(), ex.at("mean_scale").get<double>(),
                                 ex.at("eig_min").get<double>(), ex.at("eig_max").get<double>());
  // Validate every requested spec before spending time on training.
  for (const auto& m : methods)
    if (m != "whitening") model::validate_structure(model::init_params(model_spec_from(cfg.at("model").at(m), d), cc.seed));

  for (const auto& m : methods) {
    const fs::path loss_csv = dir / ("train_loss_" + m + ".csv");
    const transport::CouplingRun run = keep_partial(loss_csv, [&] {
      return m == "whitening" ? transport::run_whitening(data, cc)
                              : transport::run_coupling(model_spec_from(cfg.at("model").at(m), d), data, cc);
    });
    transport::append_coupling_csv(dir / "coupling.csv", run.report);
    transport::write_scatter_csv(dir / ("scatter_" + m + ".csv"), run.test_points, run.mapped);
    if (m != "whitening") {
      model::save_model(run.model, dir / ("model_" + m + ".json"));
      run.train_report.write_loss_csv(loss_csv);
    }
    out << "method=" << m << " d=" << d << " nll=" << fixed(run.report.nll) << " entropy=" << fixed(run.report.entropy_bound)
        << " cost=" << fixed(run.report.cost) << " optimal=" << fixed(run.report.optimal_cost) << '\n';
  }
  return kOk;
}

int cmd_adapt(const Json& cfg, const fs::path& dir, std::ostream& out) {
  const Json& ex = cfg.at("experiment");
  const std::string source = ex.at("source").get<std::string>(), target = ex.at("target").get<std::string>();
  if (source.empty() || target.empty()) fail("experiment.source and experiment.target are required");
  const auto tests = ex.at("tests").get<std::vector<std::string>>();

  imaging::AdaptConfig ac;
  ac.seed = seed_of(cfg);
  ac.max_pixels = ex.at("max_pixels").get<std::size_t>();
  if (ac.max_pixels == 0) fail("experiment.max_pixels must be positive");
  ac.train = train_config_from(cfg.at("train"), ac.seed);
  const model::ModelSpec spec = model_spec_from(cfg.at("model"), 3);
  model::validate_structure(model::init_params(spec, ac.seed));

  const imaging::PixelDataset src = imaging::load_image(source);
  const imaging::PixelDataset tgt = imaging::load_image(target);
  std::vector<imaging::PixelDataset> test_images;
  for (const auto& t : tests) test_images.push_back(imaging::load_image(t));

  const auto r = keep_partial(dir / "train_loss.csv", [&] { return imaging::adapt_train(src, tgt, spec, ac); });
  model::save_model(r.model, dir / "model.json");
  r.train_report.write_loss_csv(dir / "train_loss.csv");
  {
    io::CsvWriter csv(dir / "epoch_kl.csv", {"epoch", "kl"});
    for (std::size_t e = 0; e < r.epoch_kl.size(); ++e) csv.cell(e + 1).cell(r.epoch_kl[e]).end_row();
  }
  Json summary = Json::parse(r.to_json());
  out << "kl=" << fixed(r.kl) << " train_nll=" << fixed(r.train_nll) << '\n';

  auto& held_out = summary["tests"] = Json::array();
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const auto applied = imaging::adapt_apply(r.model, r.target, test_images[i]);
    const fs::path png = dir / ("mapped_" + fs::path(tests[i]).stem().string() + ".png");
    imaging::save_image(applied.image, png);
    held_out.push_back({{"image", tests[i]}, {"output", png.filename().string()}, {"kl", applied.kl}});
    out << "test=" << fs::path(tests[i]).filename().string() << " kl=" << fixed(applied.kl) << '\n';
  }
  io::write_text(dir / "adaptation.json", summary.dump(2) + "\n");
  return kOk;
}

int cmd_verify(const Json& cfg, const fs::path& dir, std::ostream& out, std::ostream& err) {
  const Json& ex = cfg.at("experiment");
  verify::VerifyConfig vc;
  vc.seed = seed_of(cfg);
  vc.jacobian_points = ex.at("jacobian_points").get<std::size_t>();
  vc.pairs = ex.at("pairs").get<std::size_t>();
  vc.box = ex.at("box").get<double>();
  if (!(vc.box > 0.0)) fail("experiment.box must be positive");

  verify::VerifyReport rep;
  const std::string model_file = ex.at("model_file").get<std::string>();
  if (!model_file.empty()) {
    rep = verify::verify_model(model::load_model(model_file), vc, model_file);
  } else {
    const auto dims = ex.at("dims").get<std::vector<std::size_t>>();
    for (std::size_t n : dims)
      if (n == 0) fail("experiment.dims entries must be positive");
    const std::size_t count = ex.at("count").get<std::size_t>();
    for (const auto& a : ex.at("architectures").get<std::vector<std::string>>()) {
      if (a != "cmgn" && a != "mmgn") fail("unknown architecture '" + a + "'");
      const auto arch = a == "cmgn" ? model::Architecture::Cmgn : model::Architecture::Mmgn;
      rep.merge(verify::verify_random(arch, dims, count, vc));
    }
  }
  io::write_text(dir / "verify.json", rep.to_json());
  out << rep.summary();
  if (rep.ok()) return kOk;

  for (const auto& s : rep.suites)
    for (const auto& v : s.violations) {
      err << "violation: " << s.name << " in " << v.model_label << " value=" << io::fmt17(v.value);
      if (!v.x.empty()) {
        err << " x=[";
        for (std::size_t i = 0; i < v.x.size(); ++i) err << (i ? "," : "") << io::fmt17(v.x[i]);
        err << ']';
      }
      err << '\n';
    }
  for (const auto& s : rep.suites)
    if (!s.violations.empty()) {
      io::write_text(dir / "violation_model.json", s.violations.front().model_json);
      err << "offending model written to " << (dir / "violation_model.json").string() << '\n';
      break;
    }
  return kViolation;
}

int cmd_info(const fs::path& model_file, std::ostream& out) {
  const model::Model m = model::load_model(model_file);
  Json j;
  j["architecture"] = model::architecture_name(model::architecture_of(m));
  j["n"] = model::input_dim(m);
  j["gamma"] = model::gamma_of(m);
  j["params"] = model::param_count(m);
  if (const auto* c = std::get_if<model::CmgnModel>(&m)) {
    j["width"] = c->width();
    j["layers"] = c->layers();
    j["rank"] = c->rank();
    j["diag_scales"] = c->has_diag_scales();
    auto& acts = j["activations"] = Json::array();
    for (const auto& a : c->activations) acts.push_back(a.name);
  } else {
    const auto& mm = std::get<model::MmgnModel>(m);
    j["rank"] = mm.rank();
    auto& mods = j["modules"] = Json::array();
    for (const auto& mod : mm.modules) mods.push_back({{"width", mod.W.rows()}, {"activation", mod.family.name}});
  }
  out << j.dump(2) << '\n';
  return kOk;
}

int run(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  try {
    if (rc.subcommand == "info") return cmd_info(rc.model_file, out);
    const Json cfg = resolve_config(rc.subcommand, rc.config, rc.overrides, rc.seed);
    std::error_code ec;
    fs::create_directories(rc.out, ec);
    if (ec) fail("cannot create output directory " + rc.out.string() + ": " + ec.message());
    if (rc.subcommand == "gradfield") return cmd_gradfield(cfg, rc.out, out);
    if (rc.subcommand == "coupling") return cmd_coupling(cfg, rc.out, out);
    if (rc.subcommand == "adapt") return cmd_adapt(cfg, rc.out, out);
    if (rc.subcommand == "verify") return cmd_verify(cfg, rc.out, out, err);
    fail("unknown subcommand '" + rc.subcommand + "'");
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "error (config): " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace mgn::cli
