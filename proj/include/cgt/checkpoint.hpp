#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cgt/model.hpp"

namespace cgt {

// Binary container shared by model checkpoints (magic "CGT1") and knowledge
// bases (magic "CGTK"):
//
//   4 magic bytes | u32 LE header length | UTF-8 JSON header | raw payload
//
// The header carries format_version, format-specific metadata and a tensor
// manifest [{name, dtype:"f32", shape, byte_offset, byte_len}]. Offsets are
// relative to the payload start and contiguous in manifest order; payloads
// are raw little-endian float32.

struct ContainerTensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<float> data;
};

std::string serialize_container(const std::string& magic, const nlohmann::json& meta,
                                const std::vector<ContainerTensor>& tensors);

struct ParsedContainer {
    nlohmann::json meta;  // header minus the manifest
    std::vector<ContainerTensor> tensors;
};

ParsedContainer parse_container(const std::string& bytes, const std::string& expected_magic);

void checkpoint_save(CgtModel<float>& model, const std::string& path);
CgtModel<float> checkpoint_load(const std::string& path);
// Header JSON of a checkpoint file, for inspection tooling.
nlohmann::json checkpoint_header(const std::string& path);

} // namespace cgt
