#include <filesystem>

#include "doctest.h"
#include "json.hpp"
#include "slicewise/error.hpp"
#include "slicewise/model_io.hpp"
#include "slicewise/random.hpp"

using namespace slicewise;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("slicewise_model_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json doc_of(const ModelGraph& m) { return json::parse(serialize_model(m)); }

}  // namespace

TEST_CASE("checked-in fixture is the seed-0 LeNet") {
  fs::path fixture = fs::path(SLICEWISE_SOURCE_DIR) / "models" / "lenet5.json";
  ModelGraph m = load_model(fixture);
  CHECK(m.input_shape == Shape{3, 32, 32});
  CHECK(m.layers.size() == 12);
  ModelGraph gen = random_lenet(0);
  CHECK(model_digest(m) == model_digest(gen));
  auto bytes = read_file(fixture.string());
  CHECK(std::string(bytes.begin(), bytes.end()) == serialize_model(gen));
}

TEST_CASE("serialization round trip is canonical") {
  ModelGraph m = random_lenet(3);
  std::string s = serialize_model(m);
  ModelGraph back = parse_model(s);
  CHECK(back.layers == m.layers);
  CHECK(back.weights == m.weights);
  CHECK(back.input_shape == m.input_shape);
  CHECK(serialize_model(back) == s);
  CHECK(model_digest(back) == model_digest(m));
  CHECK(model_digest(random_lenet(4)) != model_digest(m));
  CHECK(random_lenet(3).weights == m.weights);
}

TEST_CASE("sidecar weights") {
  fs::path dir = scratch("sidecar");
  ModelGraph m = random_lenet(5);
  save_model_with_sidecar(m, dir / "m.json", dir / "m.bin");
  ModelGraph back = load_model(dir / "m.json");
  CHECK(model_digest(back) == model_digest(m));

  auto blob = read_file((dir / "m.bin").string());
  blob.pop_back();
  write_file((dir / "m.bin").string(), blob);
  CHECK_THROWS_AS(load_model(dir / "m.json"), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("parse errors") {
  ModelGraph m = random_lenet(6);
  CHECK_THROWS_AS(parse_model("{not json"), FormatError);

  json empty = doc_of(m);
  empty["layers"] = json::array();
  CHECK_THROWS_AS(parse_model(empty.dump()), ValidationError);

  json unknown = doc_of(m);
  unknown["layers"][1]["kind"] = "lstm";
  CHECK_THROWS_AS(parse_model(unknown.dump()), FormatError);

  json missing = doc_of(m);
  missing["weights"]["fc2.weight"].erase("data_b64");
  CHECK_THROWS_AS(parse_model(missing.dump()), FormatError);

  json absent = doc_of(m);
  absent["weights"].erase("fc2.weight");
  CHECK_THROWS_AS(parse_model(absent.dump()), ValidationError);

  // Linear weight blob four bytes short.
  json short_blob = doc_of(m);
  auto raw = base64_decode(short_blob["weights"]["fc3.weight"]["data_b64"].get<std::string>());
  raw.resize(raw.size() - 4);
  short_blob["weights"]["fc3.weight"]["data_b64"] = base64_encode(raw);
  short_blob["weights"]["fc3.weight"].erase("sha256");
  CHECK_THROWS_AS(parse_model(short_blob.dump()), FormatError);

  json tampered = doc_of(m);
  auto bytes = base64_decode(tampered["weights"]["fc3.weight"]["data_b64"].get<std::string>());
  bytes[0] ^= 1;
  tampered["weights"]["fc3.weight"]["data_b64"] = base64_encode(bytes);
  try {
    parse_model(tampered.dump());
    FAIL("expected digest mismatch");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("digest mismatch") != std::string::npos);
  }

  json bad_shape = doc_of(m);
  bad_shape["weights"]["fc3.weight"]["shape"] = json::array({84, 10});
  CHECK_THROWS(parse_model(bad_shape.dump()));
}

TEST_CASE("weight digest covers the f32 bytes") {
  FloatTensor a({2}, {1.0, 2.0});
  FloatTensor b({2}, {1.0, 2.5});
  CHECK(weight_digest(a) == weight_digest(FloatTensor({2}, {1.0, 2.0})));
  CHECK(weight_digest(a) != weight_digest(b));
  // 1.0f = 0x3f800000, 2.0f = 0x40000000, little-endian.
  std::vector<std::uint8_t> raw{0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0x40};
  CHECK(weight_digest(a) == sha256(raw));
}
