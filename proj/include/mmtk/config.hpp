// config.hpp
// Flat key=value run configuration: defaults, file parsing, overrides,
// serialization, validation.
#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mmtk/optim.hpp"
#include "mmtk/seqtok.hpp"

namespace mmtk {

struct RunConfig {
    std::uint64_t seed = 1;

    // model widths and depths
    int channels = 64;  // C, encoder stream width
    int dmodel = 64;    // d, fused/decoder width
    int heads = 8;
    int text_layers = 2;
    int vis_layers = 4;
    int fuse_layers = 2;
    int dec_layers = 2;
    int ffn_mult = 4;

    // crop geometry; search_size doubles as the quantization range s
    int patch = 8;
    int template_size = 32;
    int search_size = 64;
    double factor_z = 2.0;
    double factor_x = 4.0;

    // sequence tokenization
    int bins = 100;
    BoxFormat box_format = BoxFormat::corner;
    QueryMode query_mode = QueryMode::multi_cues;

    // optimizer and schedule
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
    int steps = 20000;
    int batch = 8;

    // synthetic data
    int frame_size = 128;
    int seq_length = 30;
    int num_sequences = 8;
    std::string difficulty = "easy";

    // evaluation
    double precision_px = 20.0;

    // paths
    std::string data_dir;
    std::string out;
};

inline std::uint64_t parse_u64(std::string_view s, const std::string& what) {
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        fail("invalid unsigned integer for " + what + ": '" + std::string(s) + "'");
    return v;
}

namespace detail {

inline int parse_pos_int(std::string_view s, const std::string& what) {
    long v = parse_long(s, what);
    require(v >= -(1L << 30) && v <= (1L << 30), what + " out of range");
    return static_cast<int>(v);
}

}  // namespace detail

inline const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "seed",        "channels",     "dmodel",        "heads",       "text_layers",
        "vis_layers",  "fuse_layers",  "dec_layers",    "ffn_mult",    "patch",
        "template_size", "search_size", "factor_z",     "factor_x",    "bins",
        "box_format",  "query_mode",   "lr",            "beta1",       "beta2",
        "eps",         "weight_decay", "steps",         "batch",       "frame_size",
        "seq_length",  "num_sequences", "difficulty",   "precision_px", "data_dir",
        "out"};
    return keys;
}

inline void config_set(RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "seed") c.seed = parse_u64(value, key);
    else if (key == "channels") c.channels = detail::parse_pos_int(value, key);
    else if (key == "dmodel") c.dmodel = detail::parse_pos_int(value, key);
    else if (key == "heads") c.heads = detail::parse_pos_int(value, key);
    else if (key == "text_layers") c.text_layers = detail::parse_pos_int(value, key);
    else if (key == "vis_layers") c.vis_layers = detail::parse_pos_int(value, key);
    else if (key == "fuse_layers") c.fuse_layers = detail::parse_pos_int(value, key);
    else if (key == "dec_layers") c.dec_layers = detail::parse_pos_int(value, key);
    else if (key == "ffn_mult") c.ffn_mult = detail::parse_pos_int(value, key);
    else if (key == "patch") c.patch = detail::parse_pos_int(value, key);
    else if (key == "template_size") c.template_size = detail::parse_pos_int(value, key);
    else if (key == "search_size") c.search_size = detail::parse_pos_int(value, key);
    else if (key == "factor_z") c.factor_z = parse_double(value, key);
    else if (key == "factor_x") c.factor_x = parse_double(value, key);
    else if (key == "bins") c.bins = detail::parse_pos_int(value, key);
    else if (key == "box_format") c.box_format = box_format_from_string(value);
    else if (key == "query_mode") c.query_mode = query_mode_from_string(value);
    else if (key == "lr") c.lr = parse_double(value, key);
    else if (key == "beta1") c.beta1 = parse_double(value, key);
    else if (key == "beta2") c.beta2 = parse_double(value, key);
    else if (key == "eps") c.eps = parse_double(value, key);
    else if (key == "weight_decay") c.weight_decay = parse_double(value, key);
    else if (key == "steps") c.steps = detail::parse_pos_int(value, key);
    else if (key == "batch") c.batch = detail::parse_pos_int(value, key);
    else if (key == "frame_size") c.frame_size = detail::parse_pos_int(value, key);
    else if (key == "seq_length") c.seq_length = detail::parse_pos_int(value, key);
    else if (key == "num_sequences") c.num_sequences = detail::parse_pos_int(value, key);
    else if (key == "difficulty") c.difficulty = value;
    else if (key == "precision_px") c.precision_px = parse_double(value, key);
    else if (key == "data_dir") c.data_dir = value;
    else if (key == "out") c.out = value;
    else fail("unknown config key '" + key + "'");
}

inline std::string config_get(const RunConfig& c, const std::string& key) {
    if (key == "seed") return std::to_string(c.seed);
    if (key == "channels") return std::to_string(c.channels);
    if (key == "dmodel") return std::to_string(c.dmodel);
    if (key == "heads") return std::to_string(c.heads);
    if (key == "text_layers") return std::to_string(c.text_layers);
    if (key == "vis_layers") return std::to_string(c.vis_layers);
    if (key == "fuse_layers") return std::to_string(c.fuse_layers);
    if (key == "dec_layers") return std::to_string(c.dec_layers);
    if (key == "ffn_mult") return std::to_string(c.ffn_mult);
    if (key == "patch") return std::to_string(c.patch);
    if (key == "template_size") return std::to_string(c.template_size);
    if (key == "search_size") return std::to_string(c.search_size);
    if (key == "factor_z") return format_double(c.factor_z);
    if (key == "factor_x") return format_double(c.factor_x);
    if (key == "bins") return std::to_string(c.bins);
    if (key == "box_format") return to_string(c.box_format);
    if (key == "query_mode") return to_string(c.query_mode);
    if (key == "lr") return format_double(c.lr);
    if (key == "beta1") return format_double(c.beta1);
    if (key == "beta2") return format_double(c.beta2);
    if (key == "eps") return format_double(c.eps);
    if (key == "weight_decay") return format_double(c.weight_decay);
    if (key == "steps") return std::to_string(c.steps);
    if (key == "batch") return std::to_string(c.batch);
    if (key == "frame_size") return std::to_string(c.frame_size);
    if (key == "seq_length") return std::to_string(c.seq_length);
    if (key == "num_sequences") return std::to_string(c.num_sequences);
    if (key == "difficulty") return c.difficulty;
    if (key == "precision_px") return format_double(c.precision_px);
    if (key == "data_dir") return c.data_dir;
    if (key == "out") return c.out;
    fail("unknown config key '" + key + "'");
}

inline std::map<std::string, std::string> config_to_map(const RunConfig& c) {
    std::map<std::string, std::string> m;
    for (const std::string& k : config_keys()) m[k] = config_get(c, k);
    return m;
}

inline RunConfig config_from_map(const std::map<std::string, std::string>& m) {
    RunConfig c;
    for (const auto& [k, v] : m) config_set(c, k, v);
    return c;
}

inline std::string serialize_config(const RunConfig& c) {
    std::string out;
    for (const std::string& k : config_keys()) out += k + "=" + config_get(c, k) + "\n";
    return out;
}

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

// "key=value" (used for config files and command-line overrides)
inline void apply_config_line(RunConfig& c, const std::string& line, const std::string& where) {
    std::size_t eq = line.find('=');
    require(eq != std::string::npos, where + ": expected key=value, got '" + line + "'");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    require(!key.empty(), where + ": empty key in '" + line + "'");
    config_set(c, key, value);
}

inline void load_config_file(RunConfig& c, const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open config file '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        apply_config_line(c, line, path + ":" + std::to_string(lineno));
    }
}

inline void validate_config(const RunConfig& c) {
    require(c.channels > 0 && c.dmodel > 0 && c.heads > 0, "config: widths and heads must be positive");
    require(c.channels % c.heads == 0,
            "config: channels " + std::to_string(c.channels) + " not divisible by heads " +
                std::to_string(c.heads));
    require(c.dmodel % c.heads == 0,
            "config: dmodel " + std::to_string(c.dmodel) + " not divisible by heads " +
                std::to_string(c.heads));
    require(c.dmodel % 2 == 0, "config: dmodel must be even (sinusoidal positions)");
    require(c.text_layers >= 1 && c.vis_layers >= 1 && c.fuse_layers >= 1 && c.dec_layers >= 1,
            "config: every stack needs at least one layer");
    require(c.ffn_mult >= 1, "config: ffn_mult must be at least 1");
    require(c.patch > 0 && c.template_size > 0 && c.search_size > 0,
            "config: patch and crop sizes must be positive");
    require(c.template_size % c.patch == 0 && c.search_size % c.patch == 0,
            "config: crop sizes must be divisible by patch size");
    require(c.factor_z >= 1.0 && c.factor_x >= 1.0, "config: context factors must be >= 1");
    require(c.bins >= 2, "config: bins must be at least 2");
    require(c.lr > 0.0 && c.eps > 0.0, "config: lr and eps must be positive");
    require(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0,
            "config: betas must lie in [0,1)");
    require(c.weight_decay >= 0.0, "config: weight_decay must be non-negative");
    require(c.steps >= 1 && c.batch >= 1, "config: steps and batch must be positive");
    require(c.frame_size >= 16, "config: frame_size must be at least 16");
    require(c.seq_length >= 1 && c.num_sequences >= 1,
            "config: seq_length and num_sequences must be positive");
    require(c.difficulty == "easy" || c.difficulty == "hard",
            "config: difficulty must be easy or hard, got '" + c.difficulty + "'");
    require(c.precision_px > 0.0, "config: precision_px must be positive");
}

inline OptimHyper optim_hyper(const RunConfig& c) {
    OptimHyper hy;
    hy.lr = c.lr;
    hy.beta1 = c.beta1;
    hy.beta2 = c.beta2;
    hy.eps = c.eps;
    hy.weight_decay = c.weight_decay;
    return hy;
}

}  // namespace mmtk
