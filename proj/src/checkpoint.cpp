#include "cgt/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "cgt/io.hpp"

namespace cgt {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are raw little-endian float32");

using nlohmann::json;

static constexpr int kFormatVersion = 1;

std::string serialize_container(const std::string& magic, const json& meta,
                                const std::vector<ContainerTensor>& tensors) {
    if (magic.size() != 4) throw DataError("container magic must be 4 bytes");
    json header = meta;
    header["format_version"] = kFormatVersion;
    json manifest = json::array();
    std::size_t offset = 0;
    for (const ContainerTensor& t : tensors) {
        std::size_t numel = 1;
        for (std::size_t e : t.shape) numel *= e;
        if (numel != t.data.size()) throw DataError("container tensor shape/data mismatch: " + t.name);
        json e;
        e["name"] = t.name;
        e["dtype"] = "f32";
        e["shape"] = t.shape;
        e["byte_offset"] = offset;
        e["byte_len"] = t.data.size() * sizeof(float);
        manifest.push_back(e);
        offset += t.data.size() * sizeof(float);
    }
    header["tensors"] = manifest;
    const std::string hs = header.dump();
    if (hs.size() > 0xFFFFFFFFull) throw DataError("container header too large");

    std::string out;
    out.reserve(8 + hs.size() + offset);
    out += magic;
    const std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
    char lenb[4];
    std::memcpy(lenb, &hlen, 4);
    out.append(lenb, 4);
    out += hs;
    for (const ContainerTensor& t : tensors)
        out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
    return out;
}

ParsedContainer parse_container(const std::string& bytes, const std::string& expected_magic) {
    if (bytes.size() < 8) throw DataError("container truncated: missing header");
    if (bytes.compare(0, 4, expected_magic) != 0)
        throw DataError("bad magic bytes (expected " + expected_magic + ")");
    std::uint32_t hlen = 0;
    std::memcpy(&hlen, bytes.data() + 4, 4);
    if (bytes.size() < 8 + static_cast<std::size_t>(hlen))
        throw DataError("container truncated: header shorter than declared");
    json header;
    try {
        header = json::parse(bytes.substr(8, hlen));
    } catch (const json::exception& e) {
        throw DataError(std::string("container header parse error: ") + e.what());
    }
    if (!header.contains("format_version") || header.at("format_version").get<int>() != kFormatVersion)
        throw DataError("unsupported container format_version");
    if (!header.contains("tensors")) throw DataError("container header missing tensor manifest");

    const std::size_t payload_start = 8 + hlen;
    const std::size_t payload_len = bytes.size() - payload_start;

    ParsedContainer out;
    std::size_t expect_offset = 0;
    for (const json& e : header.at("tensors")) {
        ContainerTensor t;
        t.name = e.at("name").get<std::string>();
        if (e.at("dtype").get<std::string>() != "f32")
            throw DataError("unsupported tensor dtype in manifest: " + t.name);
        t.shape = e.at("shape").get<std::vector<std::size_t>>();
        const std::size_t off = e.at("byte_offset").get<std::size_t>();
        const std::size_t len = e.at("byte_len").get<std::size_t>();
        std::size_t numel = 1;
        for (std::size_t s : t.shape) numel *= s;
        if (len != numel * sizeof(float))
            throw DataError("manifest byte_len does not match shape for " + t.name);
        if (off != expect_offset) throw DataError("manifest offsets not contiguous at " + t.name);
        if (off + len > payload_len) throw DataError("container truncated: payload shorter than manifest");
        t.data.resize(numel);
        std::memcpy(t.data.data(), bytes.data() + payload_start + off, len);
        out.tensors.push_back(std::move(t));
        expect_offset = off + len;
    }
    if (expect_offset != payload_len)
        throw DataError("container payload longer than manifest declares");

    header.erase("tensors");
    out.meta = std::move(header);
    return out;
}

void checkpoint_save(CgtModel<float>& model, const std::string& path) {
    std::vector<ContainerTensor> tensors;
    ParameterStore<float>& ps = model.params();
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const Parameter<float>& p = ps.at(i);
        if (!p.tensor.all_finite())
            throw NumericError("checkpoint_save: non-finite values in " + p.name);
        tensors.push_back({p.name, p.tensor.shape, p.tensor.data});
    }
    json meta;
    meta["model_config"] = json::parse(model.config().to_json_string());
    atomic_write_file(path, serialize_container("CGT1", meta, tensors));
}

CgtModel<float> checkpoint_load(const std::string& path) {
    ParsedContainer pc = parse_container(read_file_bytes(path), "CGT1");
    if (!pc.meta.contains("model_config")) throw DataError("checkpoint header missing model_config");
    ModelConfig cfg = ModelConfig::from_json_string(pc.meta.at("model_config").dump());
    CgtModel<float> model(cfg, 0);
    ParameterStore<float>& ps = model.params();
    if (pc.tensors.size() != ps.size())
        throw DataError("checkpoint tensor count does not match model config");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        Parameter<float>& p = ps.at(i);
        const ContainerTensor& t = pc.tensors[i];
        if (t.name != p.name) throw DataError("checkpoint manifest order mismatch: " + t.name);
        if (t.shape != p.tensor.shape) throw DataError("checkpoint tensor shape mismatch: " + t.name);
        p.tensor.data = t.data;
    }
    return model;
}

nlohmann::json checkpoint_header(const std::string& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() < 8) throw DataError("container truncated: missing header");
    if (bytes.compare(0, 4, "CGT1") != 0) throw DataError("bad magic bytes (expected CGT1)");
    std::uint32_t hlen = 0;
    std::memcpy(&hlen, bytes.data() + 4, 4);
    if (bytes.size() < 8 + static_cast<std::size_t>(hlen))
        throw DataError("container truncated: header shorter than declared");
    try {
        return json::parse(bytes.substr(8, hlen));
    } catch (const json::exception& e) {
        throw DataError(std::string("container header parse error: ") + e.what());
    }
}

} // namespace cgt
