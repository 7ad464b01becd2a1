// checkpoint.hpp
// Single-file model container: "MMTK1\n" magic, length-prefixed JSON header
// (config, text vocab, tensor directory), 8-byte-aligned little-endian f64
// payload. Round trips are byte-identical.
#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "mmtk/model.hpp"

namespace mmtk {

constexpr char kCheckpointMagic[] = "MMTK1\n";
constexpr int kCheckpointVersion = 1;

namespace detail {

inline void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

}  // namespace detail

inline std::string checkpoint_bytes(const ParamStore& ps, const TextVocab& vocab,
                                    const RunConfig& cfg) {
    nlohmann::json header;
    header["format_version"] = kCheckpointVersion;
    header["config"] = config_to_map(cfg);
    header["text_vocab"] = vocab.words();
    nlohmann::json dir = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : ps.all()) {
        nlohmann::json e;
        e["name"] = name;
        e["shape"] = t.shape();
        e["dtype"] = "f64";
        e["offset"] = offset;
        dir.push_back(e);
        offset += t.numel() * 8;
    }
    header["tensors"] = dir;

    std::string out(kCheckpointMagic);
    const std::string hs = header.dump();
    detail::put_u64_le(out, hs.size());
    out += hs;
    while (out.size() % 8 != 0) out.push_back('\n');
    for (const auto& [name, t] : ps.all())
        for (double v : t.data()) detail::put_u64_le(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

inline void save_checkpoint(const ParamStore& ps, const TextVocab& vocab, const RunConfig& cfg,
                            const std::string& path) {
    const std::string bytes = checkpoint_bytes(ps, vocab, cfg);
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open checkpoint '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(out.good(), "failed writing checkpoint '" + path + "'");
}

struct CheckpointData {
    ParamStore params;
    TextVocab vocab;
    RunConfig config;
};

inline CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open checkpoint '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    const std::size_t magic_len = sizeof(kCheckpointMagic) - 1;
    require(bytes.size() >= magic_len + 8, "checkpoint '" + path + "': file too short");
    require(bytes.compare(0, magic_len, kCheckpointMagic) == 0,
            "checkpoint '" + path + "': bad magic");
    const std::uint64_t header_len =
        detail::get_u64_le(reinterpret_cast<const unsigned char*>(bytes.data()) + magic_len);
    require(magic_len + 8 + header_len <= bytes.size(),
            "checkpoint '" + path + "': truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(magic_len + 8, header_len));
    } catch (const nlohmann::json::exception& e) {
        fail("checkpoint '" + path + "': corrupt header: " + e.what());
    }
    require(header.value("format_version", -1) == kCheckpointVersion,
            "checkpoint '" + path + "': unsupported format version");

    CheckpointData out;
    const auto cfg_map = header.at("config").get<std::map<std::string, std::string>>();
    out.config = config_from_map(cfg_map);
    validate_config(out.config);
    out.vocab = TextVocab::from_words(header.at("text_vocab").get<std::vector<std::string>>());

    std::size_t payload_start = magic_len + 8 + header_len;
    while (payload_start % 8 != 0) ++payload_start;
    require(payload_start <= bytes.size(), "checkpoint '" + path + "': truncated payload");
    const std::size_t payload_size = bytes.size() - payload_start;

    std::uint64_t expected_offset = 0;
    for (const auto& e : header.at("tensors")) {
        const std::string name = e.at("name").get<std::string>();
        const Shape shape = e.at("shape").get<Shape>();
        require(e.at("dtype").get<std::string>() == "f64",
                "checkpoint '" + path + "': unsupported dtype for '" + name + "'");
        const std::uint64_t offset = e.at("offset").get<std::uint64_t>();
        require(offset == expected_offset,
                "checkpoint '" + path + "': inconsistent offset for '" + name + "'");
        const std::size_t n = shape_numel(shape);
        require(offset + n * 8 <= payload_size,
                "checkpoint '" + path + "': truncated payload at '" + name + "'");
        std::vector<double> data(n);
        const unsigned char* src =
            reinterpret_cast<const unsigned char*>(bytes.data()) + payload_start + offset;
        for (std::size_t i = 0; i < n; ++i)
            data[i] = std::bit_cast<double>(detail::get_u64_le(src + i * 8));
        out.params.add(name, Tensor::from_data(shape, std::move(data)));
        expected_offset = offset + n * 8;
    }
    require(expected_offset == payload_size,
            "checkpoint '" + path + "': payload length mismatch");

    check_param_shapes(out.params, out.vocab, out.config);
    return out;
}

}  // namespace mmtk
