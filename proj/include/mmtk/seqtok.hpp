// seqtok.hpp
// Coordinate quantization, token vocabulary, box formats, and conditional
// query construction.
#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "mmtk/nn.hpp"

namespace mmtk {

enum class BoxFormat { corner, center };
enum class QueryMode { multi_cues, single_cue };

inline std::string to_string(BoxFormat f) { return f == BoxFormat::corner ? "corner" : "center"; }
inline std::string to_string(QueryMode m) {
    return m == QueryMode::multi_cues ? "multi-cues" : "single-cue";
}

inline BoxFormat box_format_from_string(const std::string& s) {
    if (s == "corner") return BoxFormat::corner;
    if (s == "center") return BoxFormat::center;
    fail("unknown box format '" + s + "' (expected corner or center)");
}

inline QueryMode query_mode_from_string(const std::string& s) {
    if (s == "multi-cues") return QueryMode::multi_cues;
    if (s == "single-cue") return QueryMode::single_cue;
    fail("unknown query mode '" + s + "' (expected multi-cues or single-cue)");
}

// Four floats whose meaning depends on the format tag:
// corner = (x1,y1,x2,y2), center = (cx,cy,w,h).
struct Box {
    BoxFormat format = BoxFormat::corner;
    std::array<double, 4> v{0.0, 0.0, 0.0, 0.0};

    static Box corner(double x1, double y1, double x2, double y2) {
        return Box{BoxFormat::corner, {x1, y1, x2, y2}};
    }
    static Box center(double cx, double cy, double w, double h) {
        return Box{BoxFormat::center, {cx, cy, w, h}};
    }
    // tracking-file convention: top-left corner plus size
    static Box from_xywh(double x, double y, double w, double h) {
        return corner(x, y, x + w, y + h);
    }

    double x1() const { return format == BoxFormat::corner ? v[0] : v[0] - v[2] / 2.0; }
    double y1() const { return format == BoxFormat::corner ? v[1] : v[1] - v[3] / 2.0; }
    double x2() const { return format == BoxFormat::corner ? v[2] : v[0] + v[2] / 2.0; }
    double y2() const { return format == BoxFormat::corner ? v[3] : v[1] + v[3] / 2.0; }
    double cx() const { return format == BoxFormat::corner ? (v[0] + v[2]) / 2.0 : v[0]; }
    double cy() const { return format == BoxFormat::corner ? (v[1] + v[3]) / 2.0 : v[1]; }
    double w() const { return format == BoxFormat::corner ? v[2] - v[0] : v[2]; }
    double h() const { return format == BoxFormat::corner ? v[3] - v[1] : v[3]; }
    double area() const { return w() * h(); }

    Box to(BoxFormat f) const {
        if (f == format) return *this;
        if (f == BoxFormat::corner) return corner(x1(), y1(), x2(), y2());
        return center(cx(), cy(), w(), h());
    }

    bool valid() const {
        for (double c : v)
            if (!std::isfinite(c)) return false;
        if (format == BoxFormat::corner) return v[0] <= v[2] && v[1] <= v[3];
        return v[2] >= 0.0 && v[3] >= 0.0;
    }

    void validate(const char* where) const {
        require(valid(), std::string(where) + ": invalid " + to_string(format) + " box (" +
                             format_double(v[0]) + "," + format_double(v[1]) + "," +
                             format_double(v[2]) + "," + format_double(v[3]) + ")");
    }
};

// K coordinate bins with ids 0..K-1; EOS takes id K; vocab size K+1.
struct TokenVocab {
    int K = 0;

    explicit TokenVocab(int bins) : K(bins) { require(bins >= 2, "token vocab: need K >= 2 bins"); }

    int eos() const { return K; }
    int size() const { return K + 1; }
    bool is_coord(int id) const { return 0 <= id && id < K; }
    bool is_eos(int id) const { return id == K; }
};

// id = clamp(round(v/s * K), 0, K-1); values outside [0,s] clamp to the
// boundary bins, v = s itself lands in the top bin rather than colliding
// with EOS.
inline int quantize_coord(double v, double s, int K) {
    require(std::isfinite(v), "quantize_coord: non-finite coordinate");
    require(s > 0.0, "quantize_coord: search size must be positive");
    require(K >= 2, "quantize_coord: need K >= 2 bins");
    const long long id = std::llround(v / s * K);
    if (id < 0) return 0;
    if (id > K - 1) return K - 1;
    return static_cast<int>(id);
}

inline double dequantize_coord(int id, double s, int K) {
    require(s > 0.0, "dequantize_coord: search size must be positive");
    require(K >= 2, "dequantize_coord: need K >= 2 bins");
    require(0 <= id && id < K,
            "dequantize_coord: id " + std::to_string(id) + " outside coordinate range [0," +
                std::to_string(K) + ")");
    return static_cast<double>(id) * s / K;
}

inline std::array<int, 4> box_to_tokens(const Box& b, double s, const TokenVocab& vocab) {
    b.validate("box_to_tokens");
    return {quantize_coord(b.v[0], s, vocab.K), quantize_coord(b.v[1], s, vocab.K),
            quantize_coord(b.v[2], s, vocab.K), quantize_coord(b.v[3], s, vocab.K)};
}

inline Box tokens_to_box(const std::array<int, 4>& tokens, double s, const TokenVocab& vocab,
                         BoxFormat format) {
    for (int t : tokens)
        require(vocab.is_coord(t), "tokens_to_box: token " + std::to_string(t) +
                                       (vocab.is_eos(t) ? " is EOS" : " is out of range"));
    std::array<double, 4> c;
    for (int i = 0; i < 4; ++i) c[static_cast<std::size_t>(i)] = dequantize_coord(tokens[static_cast<std::size_t>(i)], s, vocab.K);
    if (format == BoxFormat::corner)
        return Box::corner(std::min(c[0], c[2]), std::min(c[1], c[3]), std::max(c[0], c[2]),
                           std::max(c[1], c[3]));
    return Box::center(c[0], c[1], std::max(c[2], 0.0), std::max(c[3], 0.0));
}

// Query parameters. Slot 0 is the only place the two modes differ: multi-cues
// embeds the pooled caption through W_e, single-cue owns a learnable start
// vector instead.
inline void add_query_params(ParamStore& ps, int channels, int d, int K, QueryMode mode,
                             std::uint64_t seed) {
    require(K >= 2, "query params: need K >= 2 bins");
    ps.add("query.embed", init_trunc_normal({K, d}, seed, "query.embed"));
    ps.add("query.pos", init_trunc_normal({5, d}, seed, "query.pos"));
    if (mode == QueryMode::multi_cues)
        add_linear(ps, "query.we", channels, d, seed);
    else
        ps.add("query.start", init_trunc_normal({1, d}, seed, "query.start"));
}

// (1 + |prev_tokens|) x d query prefix: language/start slot, then embedded
// coordinate tokens, each with its learnable positional encoding added.
inline Tensor build_conditional_queries(ParamStore& ps, const Tensor* pooled_text,
                                        const std::vector<int>& prev_tokens, QueryMode mode,
                                        const TokenVocab& vocab) {
    require(prev_tokens.size() <= 4, "conditional queries: at most 4 previous tokens");
    for (int t : prev_tokens) {
        require(!vocab.is_eos(t), "conditional queries: EOS cannot appear as a previous token");
        require(vocab.is_coord(t), "conditional queries: token " + std::to_string(t) + " out of range");
    }
    Tensor slot0;
    if (mode == QueryMode::multi_cues) {
        require(pooled_text != nullptr, "conditional queries: multi-cues mode needs pooled text");
        detail::require_matrix(*pooled_text, "conditional queries");
        require(pooled_text->rows() == 1, "conditional queries: pooled text must be a single row");
        slot0 = linear(ps, "query.we", *pooled_text);
    } else {
        slot0 = ps.at("query.start");
    }
    Tensor prefix = prev_tokens.empty()
                        ? slot0
                        : concat_rows({slot0, embedding_rows(ps.at("query.embed"), prev_tokens)});
    return add(prefix, slice_rows(ps.at("query.pos"), 0, prefix.rows()));
}

}  // namespace mmtk
