#include "onelayer/io.hpp"

#include <fstream>
#include <sstream>

namespace onelayer::io {

using numerics::Matrix;
using numerics::Mode;
using numerics::PrecisionConfig;
using numerics::Scalar;
using numerics::Vector;

namespace {

json vector_json(const Vector& v) {
  json out = json::array();
  for (const auto& x : v) out.push_back(x.to_string());
  return out;
}

json matrix_json(const Matrix& m) {
  json out = json::array();
  for (std::size_t r = 0; r < m.rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m.at(r, c).to_string());
    out.push_back(std::move(row));
  }
  return out;
}

Scalar scalar_from(const json& j, const PrecisionConfig& cfg) {
  // Decimal strings are canonical; bare JSON numbers are accepted for
  // hand-written files.
  if (j.is_string()) return Scalar::parse(j.get<std::string>(), cfg);
  if (j.is_number_integer()) return Scalar::from_int(j.get<long>(), cfg);
  if (j.is_number()) return Scalar::parse(j.dump(), cfg);
  throw SpecError("expected a number or decimal string, got " + j.dump());
}

Vector vector_from(const json& j, const PrecisionConfig& cfg) {
  if (!j.is_array()) throw SpecError("expected an array, got " + j.dump());
  Vector out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(scalar_from(x, cfg));
  return out;
}

Matrix matrix_from(const json& j, const PrecisionConfig& cfg) {
  if (!j.is_array() || j.empty()) throw SpecError("expected a nonempty matrix");
  Matrix m;
  m.rows = j.size();
  for (const auto& row : j) {
    Vector r = vector_from(row, cfg);
    if (m.cols == 0) m.cols = r.size();
    if (r.size() != m.cols || r.empty()) throw SpecError("ragged matrix");
    for (auto& x : r) m.data.push_back(std::move(x));
  }
  return m;
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw SpecError(std::string("missing field '") + key + "'");
  return j.at(key);
}

}  // namespace

json to_json(const PrecisionConfig& cfg) {
  return json{{"mode", cfg.mode == Mode::kDouble ? "double" : "bigfloat"},
              {"mantissa_bits", cfg.bits()},
              {"stable_softmax", cfg.stable_softmax}};
}

PrecisionConfig precision_from_json(const json& j) {
  const auto mode = j.at("mode").get<std::string>();
  PrecisionConfig cfg;
  if (mode == "double") {
    cfg = PrecisionConfig::hardware();
  } else if (mode == "bigfloat") {
    cfg = PrecisionConfig::bigfloat(j.at("mantissa_bits").get<int>());
  } else {
    throw std::invalid_argument("unknown precision mode '" + mode + "'");
  }
  if (j.contains("stable_softmax")) cfg.stable_softmax = j.at("stable_softmax").get<bool>();
  cfg.validate();
  return cfg;
}

json to_json(const model::MlpSpec& mlp) {
  json layers = json::array();
  for (const auto& layer : mlp.layers) {
    layers.push_back({{"w", matrix_json(layer.weight)}, {"b", vector_json(layer.bias)}});
  }
  return json{{"layers", std::move(layers)}};
}

model::MlpSpec mlp_from_json(const json& j, const PrecisionConfig& cfg) {
  model::MlpSpec mlp;
  for (const auto& layer : field(j, "layers")) {
    mlp.layers.push_back({matrix_from(field(layer, "w"), cfg), vector_from(field(layer, "b"), cfg)});
  }
  mlp.validate();
  return mlp;
}

json to_json(const model::TransformerSpec& spec) {
  json rows = json::array();
  for (const auto& row : spec.pos_encoding) rows.push_back(vector_json(row));
  return json{{"n", spec.n},
              {"sigma", spec.sigma},
              {"d", spec.d},
              {"pos_encoding", std::move(rows)},
              {"h", vector_json(spec.h)},
              {"K", matrix_json(spec.K)},
              {"Q", matrix_json(spec.Q)},
              {"mlp", to_json(spec.mlp)}};
}

model::TransformerSpec spec_from_json(const json& j, const PrecisionConfig& cfg) {
  try {
    model::TransformerSpec spec;
    spec.precision = cfg;
    spec.n = field(j, "n").get<int>();
    spec.sigma = field(j, "sigma").get<std::vector<model::Symbol>>();
    spec.d = field(j, "d").get<int>();
    for (const auto& row : field(j, "pos_encoding")) spec.pos_encoding.push_back(vector_from(row, cfg));
    spec.h = vector_from(field(j, "h"), cfg);
    spec.K = matrix_from(field(j, "K"), cfg);
    spec.Q = matrix_from(field(j, "Q"), cfg);
    spec.mlp = mlp_from_json(field(j, "mlp"), cfg);
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw SpecError(std::string("malformed spec: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw SpecError(std::string("malformed spec: ") + e.what());
  }
}

model::Word word_from_json(const json& j) {
  if (!j.is_array()) throw InputError("word must be a JSON integer array");
  model::Word w;
  for (const auto& x : j) {
    if (!x.is_number_integer()) throw InputError("word entries must be integers");
    w.push_back(x.get<model::Symbol>());
  }
  return w;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace onelayer::io
