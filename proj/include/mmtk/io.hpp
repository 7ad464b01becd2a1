// io.hpp
// On-disk formats: binary PPM frames, sequence directories, box files,
// report.json and curves.csv.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmtk/bench.hpp"

namespace mmtk {

inline void write_ppm(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open '" + path + "' for writing");
    out << "P6\n" << img.w << " " << img.h << "\n255\n";
    std::vector<unsigned char> bytes;
    bytes.reserve(img.pix.size());
    for (double v : img.pix) {
        const double clamped = std::clamp(v, 0.0, 1.0);
        bytes.push_back(static_cast<unsigned char>(std::lround(clamped * 255.0)));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(out.good(), "failed writing '" + path + "'");
}

inline Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open '" + path + "'");
    std::string magic;
    in >> magic;
    require(magic == "P6", "'" + path + "': not a binary PPM (magic '" + magic + "')");
    int w = 0, h = 0, maxval = 0;
    in >> w >> h >> maxval;
    require(in.good() && w > 0 && h > 0, "'" + path + "': bad PPM header");
    require(maxval == 255, "'" + path + "': unsupported maxval " + std::to_string(maxval));
    in.get();  // single whitespace after header
    std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(in.gcount() == static_cast<std::streamsize>(bytes.size()), "'" + path + "': truncated PPM");
    Image img(h, w);
    for (std::size_t i = 0; i < bytes.size(); ++i) img.pix[i] = bytes[i] / 255.0;
    return img;
}

inline std::string frame_filename(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%06d.ppm", index);
    return buf;
}

inline std::string box_to_line(const Box& b) {
    const Box c = b.to(BoxFormat::corner);
    return format_double(c.v[0]) + "," + format_double(c.v[1]) + "," + format_double(c.w()) + "," +
           format_double(c.h());
}

inline Box box_from_line(const std::string& line, const std::string& where) {
    std::array<double, 4> f{};
    std::size_t start = 0;
    for (int i = 0; i < 4; ++i) {
        std::size_t comma = i < 3 ? line.find(',', start) : line.size();
        require(comma != std::string::npos, where + ": expected x,y,w,h, got '" + line + "'");
        f[static_cast<std::size_t>(i)] =
            parse_double(std::string_view(line).substr(start, comma - start), where);
        start = comma + 1;
    }
    return Box::from_xywh(f[0], f[1], f[2], f[3]);
}

inline void write_boxes(const std::string& path, const std::vector<Box>& boxes) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open '" + path + "' for writing");
    for (const Box& b : boxes) out << box_to_line(b) << "\n";
    require(out.good(), "failed writing '" + path + "'");
}

inline std::vector<Box> read_boxes(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open '" + path + "'");
    std::vector<Box> boxes;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        boxes.push_back(box_from_line(line, path + ":" + std::to_string(lineno)));
    }
    require(!boxes.empty(), "'" + path + "': no boxes");
    return boxes;
}

inline void write_sequence_dir(const std::string& dir, const SyntheticSequence& seq) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < seq.frames.size(); ++i)
        write_ppm(dir + "/" + frame_filename(static_cast<int>(i)), seq.frames[i]);
    write_boxes(dir + "/groundtruth.txt", seq.gt);

    std::ofstream lang(dir + "/language.txt", std::ios::binary);
    require(lang.good(), "cannot open '" + dir + "/language.txt' for writing");
    lang << seq.caption << "\n";

    nlohmann::json meta;
    meta["seed"] = seq.seed;
    meta["name"] = seq.name;
    meta["attributes"] = seq.attributes;
    meta["frame_size"] = seq.frames.empty() ? 0 : seq.frames.front().w;
    meta["length"] = seq.frames.size();
    meta["template_id"] = seq.template_id;
    meta["target_color"] = seq.target_color;
    meta["target_shape"] = seq.target_shape;
    meta["difficulty"] = seq.difficulty;
    std::ofstream mf(dir + "/meta.json", std::ios::binary);
    require(mf.good(), "cannot open '" + dir + "/meta.json' for writing");
    mf << meta.dump(2) << "\n";
}

inline void write_dataset(const std::string& dir, const std::vector<SyntheticSequence>& seqs) {
    std::filesystem::create_directories(dir);
    for (const SyntheticSequence& seq : seqs) write_sequence_dir(dir + "/" + seq.name, seq);
}

inline SyntheticSequence load_sequence_dir(const std::string& dir) {
    SyntheticSequence seq;
    const std::string meta_path = dir + "/meta.json";
    std::ifstream mf(meta_path);
    require(mf.good(), "cannot open '" + meta_path + "'");
    nlohmann::json meta = nlohmann::json::parse(mf, nullptr, true);
    seq.name = meta.value("name", std::filesystem::path(dir).filename().string());
    seq.seed = meta.value("seed", 0ULL);
    seq.template_id = meta.value("template_id", 0);
    seq.target_color = meta.value("target_color", "");
    seq.target_shape = meta.value("target_shape", "");
    seq.difficulty = meta.value("difficulty", "");
    if (meta.contains("attributes"))
        seq.attributes = meta["attributes"].get<std::vector<std::string>>();

    std::ifstream lang(dir + "/language.txt");
    require(lang.good(), "cannot open '" + dir + "/language.txt'");
    std::getline(lang, seq.caption);
    require(!seq.caption.empty(), "'" + dir + "/language.txt': empty caption");

    seq.gt = read_boxes(dir + "/groundtruth.txt");
    for (std::size_t i = 0; i < seq.gt.size(); ++i) {
        const std::string frame_path = dir + "/" + frame_filename(static_cast<int>(i));
        require(std::filesystem::exists(frame_path), "missing frame '" + frame_path + "'");
        seq.frames.push_back(read_ppm(frame_path));
    }
    require(seq.frames.size() == seq.gt.size(), "'" + dir + "': frame/box count mismatch");
    return seq;
}

// Sequence subdirectories of a dataset root, sorted by name.
inline std::vector<std::string> list_sequence_dirs(const std::string& root) {
    require(std::filesystem::is_directory(root), "'" + root + "' is not a directory");
    std::vector<std::string> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(root))
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "groundtruth.txt"))
            dirs.push_back(entry.path().string());
    std::sort(dirs.begin(), dirs.end());
    require(!dirs.empty(), "'" + root + "': no sequence directories found");
    return dirs;
}

inline std::vector<SyntheticSequence> load_dataset(const std::string& root) {
    std::vector<SyntheticSequence> seqs;
    for (const std::string& dir : list_sequence_dirs(root)) seqs.push_back(load_sequence_dir(dir));
    return seqs;
}

inline nlohmann::json report_to_json(const MetricsReport& rep) {
    nlohmann::json j;
    j["success_auc"] = rep.auc;
    j["precision"] = rep.precision;
    j["normalized_precision"] = rep.norm_precision;
    j["per_sequence"] = nlohmann::json::array();
    for (const SequenceScores& s : rep.per_sequence) {
        nlohmann::json row;
        row["name"] = s.name;
        row["success_auc"] = s.auc;
        row["precision"] = s.precision;
        row["normalized_precision"] = s.norm_precision;
        row["attributes"] = s.attributes;
        j["per_sequence"].push_back(row);
    }
    j["per_attribute"] = nlohmann::json::object();
    for (const auto& [tag, a] : rep.per_attribute) {
        nlohmann::json row;
        row["success_auc"] = a.auc;
        row["precision"] = a.precision;
        row["normalized_precision"] = a.norm_precision;
        row["count"] = a.count;
        j["per_attribute"][tag] = row;
    }
    return j;
}

inline void write_report(const std::string& path, const MetricsReport& rep) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open '" + path + "' for writing");
    out << report_to_json(rep).dump(2) << "\n";
    require(out.good(), "failed writing '" + path + "'");
}

inline void write_curves(const std::string& path, const std::vector<double>& curve) {
    require(curve.size() == 21, "curves: expected 21 thresholds");
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open '" + path + "' for writing");
    out << "threshold,success_rate\n";
    for (int i = 0; i <= 20; ++i)
        out << format_double(i / 20.0) << "," << format_double(curve[static_cast<std::size_t>(i)])
            << "\n";
    require(out.good(), "failed writing '" + path + "'");
}

}  // namespace mmtk
