#include "slicewise/model_io.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "slicewise/error.hpp"

namespace slicewise {

using nlohmann::json;

namespace {

std::vector<std::uint8_t> encode_f32(const FloatTensor& t) {
  ByteWriter w;
  for (double v : t.data()) w.f32(static_cast<float>(v));
  return w.take();
}

FloatTensor decode_f32(const Shape& shape, std::span<const std::uint8_t> bytes, const std::string& ref) {
  std::size_t n = element_count(shape);
  if (bytes.size() != 4 * n)
    throw FormatError("weight '" + ref + "' blob holds " + std::to_string(bytes.size()) +
                      " bytes, shape " + shape_string(shape) + " needs " + std::to_string(4 * n));
  ByteReader r(bytes);
  std::vector<double> data(n);
  for (double& v : data) v = static_cast<double>(r.f32());
  return FloatTensor(shape, std::move(data));
}

std::size_t positive(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw FormatError(where + ": missing '" + key + "'");
  const json& v = j.at(key);
  if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0)
    throw FormatError(where + ": '" + key + "' must be a positive integer");
  return v.get<std::size_t>();
}

Shape parse_shape(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw FormatError(where + ": shape must be a non-empty array");
  Shape s;
  for (const json& d : j) {
    if (!d.is_number_unsigned() || d.get<std::uint64_t>() == 0)
      throw FormatError(where + ": shape dimensions must be positive integers");
    s.push_back(d.get<std::size_t>());
  }
  return s;
}

std::string ref_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_string()) throw FormatError(where + ": missing '" + key + "'");
  return j.at(key).get<std::string>();
}

LayerSpec parse_layer(const json& j, std::size_t index) {
  std::string where = "layer " + std::to_string(index);
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    throw FormatError(where + ": expected an object with a 'kind'");
  LayerKind kind = layer_kind_from_string(j.at("kind").get<std::string>());
  switch (kind) {
    case LayerKind::conv2d:
      return LayerSpec::conv2d(positive(j, "in_channels", where), positive(j, "out_channels", where),
                               positive(j, "kernel", where), positive(j, "stride", where),
                               ref_field(j, "weight_ref", where), ref_field(j, "bias_ref", where));
    case LayerKind::linear:
      return LayerSpec::linear(positive(j, "in_features", where), positive(j, "out_features", where),
                               ref_field(j, "weight_ref", where), ref_field(j, "bias_ref", where));
    case LayerKind::maxpool2d: return LayerSpec::maxpool2d(positive(j, "window", where));
    case LayerKind::relu: return LayerSpec::relu();
    case LayerKind::flatten: return LayerSpec::flatten();
  }
  throw FormatError(where + ": unsupported kind");
}

json layer_json(const LayerSpec& l) {
  json j;
  j["kind"] = std::string(to_string(l.kind));
  switch (l.kind) {
    case LayerKind::conv2d:
      j["in_channels"] = l.in_channels;
      j["out_channels"] = l.out_channels;
      j["kernel"] = l.kernel;
      j["stride"] = l.stride;
      break;
    case LayerKind::linear:
      j["in_features"] = l.in_features;
      j["out_features"] = l.out_features;
      break;
    case LayerKind::maxpool2d: j["window"] = l.window; break;
    default: break;
  }
  if (l.weight_ref) j["weight_ref"] = *l.weight_ref;
  if (l.bias_ref) j["bias_ref"] = *l.bias_ref;
  return j;
}

json skeleton(const ModelGraph& model) {
  json doc;
  doc["input_shape"] = model.input_shape;
  doc["layers"] = json::array();
  for (const LayerSpec& l : model.layers) doc["layers"].push_back(layer_json(l));
  doc["weights"] = json::object();
  return doc;
}

}  // namespace

Digest weight_digest(const FloatTensor& weight) { return sha256(encode_f32(weight)); }

ModelGraph parse_model(std::string_view document, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("malformed model JSON: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("model document must be a JSON object");
  for (const char* key : {"input_shape", "layers", "weights"})
    if (!doc.contains(key)) throw FormatError(std::string("model document lacks '") + key + "'");

  ModelGraph model;
  model.input_shape = parse_shape(doc.at("input_shape"), "input_shape");

  const json& layers = doc.at("layers");
  if (!layers.is_array()) throw FormatError("'layers' must be an array");
  if (layers.empty()) throw ValidationError("model has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) model.layers.push_back(parse_layer(layers[i], i));

  std::vector<std::uint8_t> sidecar;
  bool sidecar_loaded = false;
  const json& weights = doc.at("weights");
  if (!weights.is_object()) throw FormatError("'weights' must be an object");
  for (const auto& [ref, w] : weights.items()) {
    std::string where = "weight '" + ref + "'";
    if (!w.is_object()) throw FormatError(where + ": expected an object");
    if (!w.contains("dtype") || w.at("dtype") != "f32") throw FormatError(where + ": dtype must be \"f32\"");
    Shape shape = parse_shape(w.value("shape", json()), where);
    std::vector<std::uint8_t> bytes;
    if (w.contains("data_b64")) {
      if (!w.at("data_b64").is_string()) throw FormatError(where + ": data_b64 must be a string");
      bytes = base64_decode(w.at("data_b64").get<std::string>());
    } else if (w.contains("offset") && w.contains("length")) {
      if (!doc.contains("weights_file") || !doc.at("weights_file").is_string())
        throw FormatError(where + ": offset/length given but no weights_file");
      if (!sidecar_loaded) {
        sidecar = read_file((base_dir / doc.at("weights_file").get<std::string>()).string());
        sidecar_loaded = true;
      }
      std::size_t offset = w.at("offset").is_number_unsigned() ? w.at("offset").get<std::size_t>() : SIZE_MAX;
      std::size_t length = w.at("length").is_number_unsigned() ? w.at("length").get<std::size_t>() : SIZE_MAX;
      if (offset == SIZE_MAX || length == SIZE_MAX || offset > sidecar.size() || length > sidecar.size() - offset)
        throw FormatError(where + ": sidecar range out of bounds");
      bytes.assign(sidecar.begin() + static_cast<std::ptrdiff_t>(offset),
                   sidecar.begin() + static_cast<std::ptrdiff_t>(offset + length));
    } else {
      throw FormatError(where + ": missing weight blob (data_b64 or offset/length)");
    }
    if (w.contains("sha256")) {
      if (!w.at("sha256").is_string()) throw FormatError(where + ": sha256 must be a string");
      if (sha256(bytes).hex() != w.at("sha256").get<std::string>())
        throw FormatError(where + ": digest mismatch");
    }
    model.weights.emplace(ref, decode_f32(shape, bytes, ref));
  }

  check_model(model);
  return model;
}

ModelGraph load_model(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes = read_file(path.string());
  return parse_model(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                     path.parent_path());
}

std::string serialize_model(const ModelGraph& model) {
  json doc = skeleton(model);
  for (const auto& [ref, t] : model.weights) {
    std::vector<std::uint8_t> bytes = encode_f32(t);
    doc["weights"][ref] = {{"shape", t.shape()},
                           {"dtype", "f32"},
                           {"data_b64", base64_encode(bytes)},
                           {"sha256", sha256(bytes).hex()}};
  }
  return doc.dump();
}

Digest model_digest(const ModelGraph& model) { return sha256(serialize_model(model)); }

void save_model_with_sidecar(const ModelGraph& model, const std::filesystem::path& json_path,
                             const std::filesystem::path& bin_path) {
  json doc = skeleton(model);
  doc["weights_file"] = bin_path.filename().string();
  ByteWriter blob;
  for (const auto& [ref, t] : model.weights) {
    std::vector<std::uint8_t> bytes = encode_f32(t);
    doc["weights"][ref] = {{"shape", t.shape()},
                           {"dtype", "f32"},
                           {"offset", blob.buffer().size()},
                           {"length", bytes.size()},
                           {"sha256", sha256(bytes).hex()}};
    blob.bytes(bytes);
  }
  write_file(bin_path.string(), blob.buffer());
  write_file(json_path.string(), doc.dump(1));
}

}  // namespace slicewise
