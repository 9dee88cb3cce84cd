#include "config.hpp"

#include "mgn/io.hpp"

namespace mgn::cli {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); }

Json model_defaults() {
  Json m;
  m["architecture"] = "cmgn";
  m["rank"] = 0u;
  m["gamma"] = 0.0;
  m["width"] = 2u;
  m["layers"] = 2u;
  m["diag_scales"] = false;
  m["modules"] = 2u;
  m["module_widths"] = Json::array();
  m["activations"] = Json::array({"tanh_only"});
  return m;
}

Json train_defaults() {
  const train::TrainConfig t;
  Json j;
  j["batch_size"] = t.batch_size;
  j["epochs"] = t.epochs;
  j["learning_rate"] = t.learning_rate;
  j["adam_beta1"] = t.adam_beta1;
  j["adam_beta2"] = t.adam_beta2;
  j["adam_eps"] = t.adam_eps;
  return j;
}

bool same_kind(const Json& def, const Json& v) {
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_number_float()) return v.is_number();
  if (def.is_number_unsigned()) return v.is_number_unsigned();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  if (def.is_object()) return v.is_object();
  return false;
}

void merge_into(Json& dst, const Json& src, const std::string& where) {
  if (!src.is_object()) fail(where.empty() ? "config must be an object" : where + " must be an object");
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!dst.contains(it.key())) fail("unknown config key '" + key + "'");
    Json& slot = dst[it.key()];
    if (slot.is_object()) {
      merge_into(slot, it.value(), key);
    } else if (slot.is_array() && !it.value().is_array() && it.value().is_string()) {
      slot = Json::array({it.value()});
    } else if (!same_kind(slot, it.value())) {
      fail("config key '" + key + "' has the wrong type");
    } else {
      slot = it.value();
    }
  }
}

Json parse_value(const std::string& text) {
  Json v = Json::parse(text, nullptr, false);
  if (v.is_discarded()) return Json(text);
  return v;
}

}  // namespace

Json defaults_for(std::string_view sub) {
  Json d;
  d["seed"] = 42u;
  if (sub == "gradfield") {
    d["model"] = model_defaults();
    d["train"] = train_defaults();
    d["experiment"] = {{"samples", 1000000u}};
  } else if (sub == "coupling") {
    Json cm = model_defaults(), mm = model_defaults();
    mm["architecture"] = "mmgn";
    mm["activations"] = Json::array({"logcosh_tanh"});
    cm["gamma"] = mm["gamma"] = 0.1;
    d["model"] = {{"cmgn", cm}, {"mmgn", mm}};
    d["train"] = train_defaults();
    d["experiment"] = {{"d", 2u},
                       {"data_seed", 1u},
                       {"methods", Json::array({"cmgn", "mmgn", "whitening"})},
                       {"train_samples", 20000u},
                       {"test_samples", 100000u},
                       {"mean_scale", 1.0},
                       {"eig_min", 0.25},
                       {"eig_max", 4.0}};
  } else if (sub == "adapt") {
    Json m = model_defaults();
    m["architecture"] = "mmgn";
    m["activations"] = Json::array({"logcosh_tanh"});
    m["gamma"] = 0.1;
    d["model"] = m;
    d["train"] = train_defaults();
    d["experiment"] = {{"source", ""}, {"target", ""}, {"tests", Json::array()}, {"max_pixels", 100000u}};
  } else if (sub == "verify") {
    d["experiment"] = {{"model_file", ""},
                       {"architectures", Json::array({"cmgn", "mmgn"})},
                       {"dims", Json::array({1, 2, 5, 16})},
                       {"count", 100u},
                       {"jacobian_points", 4u},
                       {"pairs", 10000u},
                       {"box", 3.0}};
  } else {
    fail("no configuration for subcommand '" + std::string(sub) + "'");
  }
  return d;
}

Json resolve_config(std::string_view sub, const std::optional<std::filesystem::path>& file,
                    const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed) {
  Json cfg = defaults_for(sub);
  if (file) {
    std::string text;
    try {
      text = io::read_text(*file);
    } catch (const Error& e) {
      fail(e.what());
    }
    Json parsed = Json::parse(text, nullptr, false);
    if (parsed.is_discarded()) fail(file->string() + " is not valid JSON");
    merge_into(cfg, parsed, "");
  }
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) fail("override '" + ov + "' is not key=value");
    const std::string path = ov.substr(0, eq);
    std::vector<std::string> keys;
    for (std::size_t pos = 0;;) {
      const auto dot = path.find('.', pos);
      keys.push_back(path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos));
      if (keys.back().empty()) fail("override '" + ov + "' has an empty key");
      if (dot == std::string::npos) break;
      pos = dot + 1;
    }
    Json patch = parse_value(ov.substr(eq + 1));
    for (auto k = keys.rbegin(); k != keys.rend(); ++k) patch = Json{{*k, patch}};
    merge_into(cfg, patch, "");
  }
  if (seed) cfg["seed"] = *seed;
  return cfg;
}

model::ModelSpec model_spec_from(const Json& m, std::size_t n) {
  model::ModelSpec s;
  const std::string arch = m.at("architecture").get<std::string>();
  if (arch == "cmgn")
    s.arch = model::Architecture::Cmgn;
  else if (arch == "mmgn")
    s.arch = model::Architecture::Mmgn;
  else
    fail("unknown architecture '" + arch + "'");
  s.n = m.contains("n") ? m.at("n").get<std::size_t>() : n;
  s.rank = m.at("rank").get<std::size_t>();
  s.gamma = m.at("gamma").get<double>();
  s.width = m.at("width").get<std::size_t>();
  s.layers = m.at("layers").get<std::size_t>();
  s.diag_scales = m.at("diag_scales").get<bool>();
  s.modules = m.at("modules").get<std::size_t>();
  try {
    s.module_widths = m.at("module_widths").get<std::vector<std::size_t>>();
    s.activations = m.at("activations").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception&) {
    fail("module_widths must be non-negative integers and activations strings");
  }
  return s;
}

train::TrainConfig train_config_from(const Json& t, std::uint64_t seed) {
  train::TrainConfig c;
  c.batch_size = t.at("batch_size").get<std::size_t>();
  c.epochs = t.at("epochs").get<std::size_t>();
  c.learning_rate = t.at("learning_rate").get<double>();
  c.adam_beta1 = t.at("adam_beta1").get<double>();
  c.adam_beta2 = t.at("adam_beta2").get<double>();
  c.adam_eps = t.at("adam_eps").get<double>();
  c.seed = seed;
  c.validate();
  return c;
}

}  // namespace mgn::cli
