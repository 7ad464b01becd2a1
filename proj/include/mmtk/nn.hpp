// nn.hpp
// Transformer building blocks on top of the autograd ops: seeded init,
// linear / layer-norm / multi-head attention helpers, pre-norm encoder and
// decoder stacks, and the fixed sinusoidal position table.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mmtk/ops.hpp"
#include "mmtk/optim.hpp"

namespace mmtk {

constexpr double kLayerNormEps = 1e-8;

// Each parameter draws from its own stream keyed by (seed, name), so adding
// or removing unrelated parameters never shifts anyone else's init values.
inline Tensor init_trunc_normal(const Shape& shape, std::uint64_t seed, const std::string& name,
                                double stddev = 0.02) {
    Rng rng(hash_combine(seed, hash_str(name)));
    Tensor t = Tensor::zeros(shape);
    for (std::size_t i = 0; i < t.numel(); ++i) t.ptr()[i] = rng.trunc_normal(stddev);
    return t;
}

inline Tensor init_const(const Shape& shape, double value) {
    Tensor t = Tensor::zeros(shape);
    for (std::size_t i = 0; i < t.numel(); ++i) t.ptr()[i] = value;
    return t;
}

inline void add_linear(ParamStore& ps, const std::string& name, int in, int out, std::uint64_t seed) {
    ps.add(name + ".w", init_trunc_normal({in, out}, seed, name + ".w"));
    ps.add(name + ".b", Tensor::zeros({out}));
}

inline Tensor linear(ParamStore& ps, const std::string& name, const Tensor& x) {
    return add_rowvec(matmul(x, ps.at(name + ".w")), ps.at(name + ".b"));
}

inline void add_layer_norm(ParamStore& ps, const std::string& name, int d) {
    ps.add(name + ".g", init_const({d}, 1.0));
    ps.add(name + ".b", Tensor::zeros({d}));
}

inline Tensor apply_layer_norm(ParamStore& ps, const std::string& name, const Tensor& x,
                               double eps = kLayerNormEps) {
    return layer_norm(x, ps.at(name + ".g"), ps.at(name + ".b"), eps);
}

inline void add_mha(ParamStore& ps, const std::string& name, int d, std::uint64_t seed) {
    add_linear(ps, name + ".q", d, d, seed);
    add_linear(ps, name + ".k", d, d, seed);
    add_linear(ps, name + ".v", d, d, seed);
    add_linear(ps, name + ".o", d, d, seed);
}

// q_in: n x d queries, kv_in: m x d keys/values, mask: optional n x m
// keep-mask shared by all heads.
inline Tensor mha(ParamStore& ps, const std::string& name, const Tensor& q_in, const Tensor& kv_in,
                  int heads, const BoolMask* mask = nullptr) {
    const int d = q_in.cols();
    require(kv_in.cols() == d, "mha: query and key/value widths disagree");
    require(heads > 0 && d % heads == 0,
            "mha: model dim " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
    const int dh = d / heads;
    Tensor q = linear(ps, name + ".q", q_in);
    Tensor k = linear(ps, name + ".k", kv_in);
    Tensor v = linear(ps, name + ".v", kv_in);
    std::vector<Tensor> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
        Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
        Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
        outs.push_back(attention(qh, kh, vh, mask));
    }
    return linear(ps, name + ".o", concat_cols(outs));
}

inline void add_ffn(ParamStore& ps, const std::string& name, int d, int mult, std::uint64_t seed) {
    add_linear(ps, name + ".up", d, d * mult, seed);
    add_linear(ps, name + ".down", d * mult, d, seed);
}

inline Tensor ffn(ParamStore& ps, const std::string& name, const Tensor& x) {
    return linear(ps, name + ".down", gelu(linear(ps, name + ".up", x)));
}

inline void add_encoder_layer(ParamStore& ps, const std::string& name, int d, int ffn_mult,
                              std::uint64_t seed) {
    add_layer_norm(ps, name + ".ln1", d);
    add_mha(ps, name + ".attn", d, seed);
    add_layer_norm(ps, name + ".ln2", d);
    add_ffn(ps, name + ".ffn", d, ffn_mult, seed);
}

inline Tensor encoder_layer(ParamStore& ps, const std::string& name, const Tensor& x, int heads) {
    Tensor h = apply_layer_norm(ps, name + ".ln1", x);
    Tensor a = add(x, mha(ps, name + ".attn", h, h, heads));
    Tensor f = apply_layer_norm(ps, name + ".ln2", a);
    return add(a, ffn(ps, name + ".ffn", f));
}

inline void add_encoder(ParamStore& ps, const std::string& prefix, int d, int layers, int ffn_mult,
                        std::uint64_t seed) {
    require(layers > 0, "encoder: need at least one layer");
    for (int l = 0; l < layers; ++l)
        add_encoder_layer(ps, prefix + ".l" + std::to_string(l), d, ffn_mult, seed);
    add_layer_norm(ps, prefix + ".ln_f", d);
}

inline Tensor encoder_forward(ParamStore& ps, const std::string& prefix, Tensor x, int layers,
                              int heads) {
    for (int l = 0; l < layers; ++l) x = encoder_layer(ps, prefix + ".l" + std::to_string(l), x, heads);
    return apply_layer_norm(ps, prefix + ".ln_f", x);
}

inline void add_decoder_layer(ParamStore& ps, const std::string& name, int d, int ffn_mult,
                              std::uint64_t seed) {
    add_layer_norm(ps, name + ".ln1", d);
    add_mha(ps, name + ".self", d, seed);
    add_layer_norm(ps, name + ".ln2", d);
    add_mha(ps, name + ".cross", d, seed);
    add_layer_norm(ps, name + ".ln3", d);
    add_ffn(ps, name + ".ffn", d, ffn_mult, seed);
}

inline Tensor decoder_layer(ParamStore& ps, const std::string& name, const Tensor& x,
                            const Tensor& memory, int heads, const BoolMask* self_mask) {
    Tensor h1 = apply_layer_norm(ps, name + ".ln1", x);
    Tensor a = add(x, mha(ps, name + ".self", h1, h1, heads, self_mask));
    Tensor h2 = apply_layer_norm(ps, name + ".ln2", a);
    Tensor b = add(a, mha(ps, name + ".cross", h2, memory, heads));
    Tensor h3 = apply_layer_norm(ps, name + ".ln3", b);
    return add(b, ffn(ps, name + ".ffn", h3));
}

inline void add_decoder(ParamStore& ps, const std::string& prefix, int d, int layers, int ffn_mult,
                        std::uint64_t seed) {
    require(layers > 0, "decoder: need at least one layer");
    for (int l = 0; l < layers; ++l)
        add_decoder_layer(ps, prefix + ".l" + std::to_string(l), d, ffn_mult, seed);
    add_layer_norm(ps, prefix + ".ln_f", d);
}

// tgt: L x d query tokens, memory: N x d encoded context. self_mask guards
// the target self-attention (causal in the model).
inline Tensor decoder_stack_forward(ParamStore& ps, const std::string& prefix, Tensor tgt,
                                    const Tensor& memory, int layers, int heads,
                                    const BoolMask* self_mask) {
    for (int l = 0; l < layers; ++l)
        tgt = decoder_layer(ps, prefix + ".l" + std::to_string(l), tgt, memory, heads, self_mask);
    return apply_layer_norm(ps, prefix + ".ln_f", tgt);
}

// Fixed sinusoidal table: row p, even column 2i = sin(p / 10000^(2i/d)),
// odd column 2i+1 = cos of the same angle. Plain data, never trained.
inline Tensor sine_positions(int n, int d) {
    require(n > 0 && d > 0 && d % 2 == 0, "sine_positions: need positive n and even d");
    Tensor t = Tensor::zeros({n, d});
    for (int p = 0; p < n; ++p) {
        for (int i = 0; i < d / 2; ++i) {
            const double freq = std::pow(10000.0, -2.0 * i / d);
            t.ptr()[static_cast<std::size_t>(p) * d + 2 * i] = std::sin(p * freq);
            t.ptr()[static_cast<std::size_t>(p) * d + 2 * i + 1] = std::cos(p * freq);
        }
    }
    return t;
}

// Raster-order 2D grid positions: first half of each row encodes the column
// index, second half the row index, both with the 1D sinusoid above.
inline Tensor grid_sine_positions(int cells_y, int cells_x, int d) {
    require(cells_y > 0 && cells_x > 0 && d > 0 && d % 4 == 0,
            "grid_sine_positions: need positive grid and d divisible by 4");
    Tensor tx = sine_positions(cells_x, d / 2);
    Tensor ty = sine_positions(cells_y, d / 2);
    Tensor t = Tensor::zeros({cells_y * cells_x, d});
    for (int y = 0; y < cells_y; ++y)
        for (int x = 0; x < cells_x; ++x) {
            double* row = t.ptr() + static_cast<std::size_t>(y * cells_x + x) * d;
            for (int i = 0; i < d / 2; ++i) {
                row[i] = tx.ptr()[static_cast<std::size_t>(x) * (d / 2) + i];
                row[d / 2 + i] = ty.ptr()[static_cast<std::size_t>(y) * (d / 2) + i];
            }
        }
    return t;
}

}  // namespace mmtk
