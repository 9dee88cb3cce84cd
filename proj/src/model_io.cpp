#include "json.hpp"

#include <sstream>

#include "mgn/io.hpp"
#include "mgn/model.hpp"

namespace mgn::model {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

// nlohmann prints shortest round-trip decimals; the file format pins 17
// significant digits, so documents are emitted by hand and parsed back with json.
std::string array(std::span<const double> v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += io::fmt17(v[i]);
  }
  return s + "]";
}

std::string array_list(const std::vector<DenseVector>& vs) {
  std::string s = "[";
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i) s += ", ";
    s += array(vs[i].span());
  }
  return s + "]";
}

std::string quoted(std::string_view s) { return json(std::string(s)).dump(); }

[[noreturn]] void format_error(const std::string& msg) { throw Error(ErrorKind::FormatError, msg); }

std::vector<double> numbers(const json& j, std::size_t expected, const char* what) {
  if (!j.is_array()) format_error(std::string(what) + " must be an array");
  if (j.size() != expected)
    format_error(std::string(what) + " has " + std::to_string(j.size()) + " entries, expected " +
                 std::to_string(expected));
  std::vector<double> v;
  v.reserve(expected);
  for (const auto& e : j) {
    if (!e.is_number()) format_error(std::string(what) + " contains a non-number");
    v.push_back(e.get<double>());
  }
  return v;
}

std::size_t dim(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_number_unsigned()) format_error(std::string("missing dimension '") + key + "'");
  return doc[key].get<std::size_t>();
}

act::ActivationFamily family(const json& j) {
  if (!j.is_string()) format_error("activation name must be a string");
  try {
    return act::catalog_get(j.get<std::string>());
  } catch (const Error& e) {
    format_error(e.what());
  }
}

}  // namespace

std::string model_to_json(const Model& m) {
  std::ostringstream s;
  s << "{\n  \"format_version\": " << kFormatVersion << ",\n";
  s << "  \"architecture\": " << quoted(architecture_name(architecture_of(m))) << ",\n";
  s << "  \"n\": " << input_dim(m) << ",\n";
  s << "  \"gamma\": " << io::fmt17(gamma_of(m)) << ",\n";
  if (const auto* c = std::get_if<CmgnModel>(&m)) {
    s << "  \"width\": " << c->width() << ",\n";
    s << "  \"layers\": " << c->layers() << ",\n";
    s << "  \"rank\": " << c->rank() << ",\n";
    s << "  \"diag_scales\": " << (c->has_diag_scales() ? "true" : "false") << ",\n";
    s << "  \"activations\": [";
    for (std::size_t i = 0; i < c->activations.size(); ++i) s << (i ? ", " : "") << quoted(c->activations[i].name);
    s << "],\n  \"parameters\": {\n";
    s << "    \"W\": " << array(c->W.span()) << ",\n";
    s << "    \"biases\": " << array_list(c->biases) << ",\n";
    s << "    \"out_bias\": " << array(c->out_bias.span()) << ",\n";
    s << "    \"V\": " << array(c->V.span());
    if (c->has_diag_scales()) {
      s << ",\n    \"scale_input\": " << array_list(c->scale_input);
      s << ",\n    \"scale_act\": " << array_list(c->scale_act);
    }
    s << "\n  }\n}\n";
  } else {
    const auto& mm = std::get<MmgnModel>(m);
    s << "  \"rank\": " << mm.rank() << ",\n";
    s << "  \"modules\": [";
    for (std::size_t k = 0; k < mm.modules.size(); ++k) {
      const auto& mod = mm.modules[k];
      s << (k ? ",\n" : "\n") << "    {\"width\": " << mod.W.rows() << ", \"activation\": " << quoted(mod.family.name)
        << ",\n     \"W\": " << array(mod.W.span()) << ",\n     \"b\": " << array(mod.b.span()) << "}";
    }
    s << (mm.modules.empty() ? "],\n" : "\n  ],\n");
    s << "  \"parameters\": {\n";
    s << "    \"a\": " << array(mm.a.span()) << ",\n";
    s << "    \"V\": " << array(mm.V.span()) << "\n  }\n}\n";
  }
  return s.str();
}

Model model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    format_error(std::string("malformed model document: ") + e.what());
  }
  if (!doc.is_object()) format_error("model document must be an object");
  if (!doc.contains("format_version") || doc["format_version"] != kFormatVersion)
    format_error("unsupported format_version");
  if (!doc.contains("architecture") || !doc["architecture"].is_string()) format_error("missing architecture");
  if (!doc.contains("gamma") || !doc["gamma"].is_number()) format_error("missing gamma");
  if (!doc.contains("parameters") || !doc["parameters"].is_object()) format_error("missing parameters");
  const std::string arch = doc["architecture"];
  const std::size_t n = dim(doc, "n");
  const std::size_t r = dim(doc, "rank");
  const json& p = doc["parameters"];
  auto field = [&](const char* key) -> const json& {
    if (!p.contains(key)) format_error(std::string("missing parameter '") + key + "'");
    return p[key];
  };

  try {
    if (arch == "cmgn") {
      const std::size_t h = dim(doc, "width");
      const std::size_t L = dim(doc, "layers");
      CmgnModel m;
      m.gamma = doc["gamma"].get<double>();
      if (!doc.contains("activations") || !doc["activations"].is_array() || doc["activations"].size() != L)
        format_error("need one activation per layer");
      for (const auto& a : doc["activations"]) m.activations.push_back(family(a));
      m.W = DenseMatrix(h, n, numbers(field("W"), h * n, "W"));
      const json& biases = field("biases");
      if (!biases.is_array() || biases.size() != L) format_error("need one hidden bias per layer");
      for (const auto& b : biases) m.biases.emplace_back(numbers(b, h, "bias"));
      m.out_bias = DenseVector(numbers(field("out_bias"), n, "out_bias"));
      m.V = DenseMatrix(r, n, numbers(field("V"), r * n, "V"));
      if (doc.value("diag_scales", false)) {
        for (const char* key : {"scale_input", "scale_act"}) {
          const json& list = field(key);
          if (!list.is_array() || list.size() != L) format_error(std::string(key) + " needs one entry per layer");
          auto& dst = std::string(key) == "scale_input" ? m.scale_input : m.scale_act;
          for (const auto& s : list) dst.emplace_back(numbers(s, h, key));
        }
      }
      validate_structure(m);
      return m;
    }
    if (arch == "mmgn") {
      MmgnModel m;
      m.gamma = doc["gamma"].get<double>();
      m.a = DenseVector(numbers(field("a"), n, "a"));
      m.V = DenseMatrix(r, n, numbers(field("V"), r * n, "V"));
      if (!doc.contains("modules") || !doc["modules"].is_array()) format_error("missing modules");
      for (const auto& mod : doc["modules"]) {
        if (!mod.is_object()) format_error("module must be an object");
        const std::size_t h = dim(mod, "width");
        if (!mod.contains("activation")) format_error("module lacks activation");
        if (!mod.contains("W") || !mod.contains("b")) format_error("module lacks W or b");
        m.modules.push_back({DenseMatrix(h, n, numbers(mod["W"], h * n, "W_k")), DenseVector(numbers(mod["b"], h, "b_k")),
                             family(mod["activation"])});
      }
      validate_structure(m);
      return m;
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::FormatError) throw;
    format_error(e.what());
  } catch (const json::exception& e) {
    format_error(e.what());
  }
  format_error("unknown architecture '" + arch + "'");
}

void save_model(const Model& m, const std::filesystem::path& path) { io::write_text(path, model_to_json(m)); }

Model load_model(const std::filesystem::path& path) { return model_from_json(io::read_text(path)); }

}  // namespace mgn::model
