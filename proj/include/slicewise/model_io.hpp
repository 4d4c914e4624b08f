#pragma once

// Model document format:
//
//   {"input_shape": [3,32,32],
//    "layers": [{"kind": "conv2d", "in_channels": 3, "out_channels": 6, "kernel": 5,
//                "stride": 1, "weight_ref": "conv1.weight", "bias_ref": "conv1.bias"}, ...],
//    "weights": {"conv1.weight": {"shape": [6,3,5,5], "dtype": "f32",
//                                 "data_b64": "...", "sha256": "..."}, ...},
//    "weights_file": "lenet5.bin"}            // optional sidecar
//
// A weight either inlines its bytes (data_b64) or points into the sidecar with
// "offset"/"length". Bytes are little-endian IEEE-754 binary32. "sha256", when
// present, is the digest of those raw bytes.

#include <filesystem>
#include <string>
#include <string_view>

#include "slicewise/digest.hpp"
#include "slicewise/model.hpp"

namespace slicewise {

ModelGraph parse_model(std::string_view document, const std::filesystem::path& base_dir = {});
ModelGraph load_model(const std::filesystem::path& path);

// Canonical form: sorted keys, inline base64 weights with digests, no sidecar.
std::string serialize_model(const ModelGraph& model);

Digest model_digest(const ModelGraph& model);
Digest weight_digest(const FloatTensor& weight);

// Writes the JSON document plus a sidecar holding every weight blob.
void save_model_with_sidecar(const ModelGraph& model, const std::filesystem::path& json_path,
                             const std::filesystem::path& bin_path);

}  // namespace slicewise
