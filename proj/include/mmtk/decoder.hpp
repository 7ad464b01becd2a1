// decoder.hpp
// Causal multi-modal decoder over the fused VL memory, the three-layer
// sequence head, and the greedy auto-regressive decode loop.
#pragma once

#include <array>

#include "mmtk/seqtok.hpp"

namespace mmtk {

constexpr int kTargetLen = 5;  // 4 coordinate tokens + EOS supervision

inline void add_decoder_params(ParamStore& ps, int d, int layers, int ffn_mult, int K,
                               std::uint64_t seed) {
    add_decoder(ps, "dec", d, layers, ffn_mult, seed);
    add_linear(ps, "head.l1", d, d, seed);
    add_linear(ps, "head.l2", d, d, seed);
    add_linear(ps, "head.l3", d, K + 1, seed);
}

// Hidden states for a query prefix: causal self-attention over the queries,
// cross-attention against F_vl with the sinusoidal table added.
inline Tensor decoder_forward(ParamStore& ps, const Tensor& f_vl, const Tensor& queries, int layers,
                              int heads) {
    detail::require_matrix(f_vl, "decoder_forward");
    detail::require_matrix(queries, "decoder_forward");
    require(f_vl.cols() == queries.cols(), "decoder_forward: memory and query widths disagree");
    const int len = queries.rows();
    require(1 <= len && len <= kTargetLen,
            "decoder_forward: prefix length " + std::to_string(len) + " outside [1," +
                std::to_string(kTargetLen) + "]");
    Tensor memory = add(f_vl, sine_positions(f_vl.rows(), f_vl.cols()));
    BoolMask mask = causal_mask(len);
    return decoder_stack_forward(ps, "dec", queries, memory, layers, heads, &mask);
}

// Three affine layers with ReLU between, applied per position: d -> d -> d -> K+1.
inline Tensor head_logits(ParamStore& ps, const Tensor& hidden) {
    Tensor h1 = relu(linear(ps, "head.l1", hidden));
    Tensor h2 = relu(linear(ps, "head.l2", h1));
    return linear(ps, "head.l3", h2);
}

// argmax over columns [0, hi) of the last row, ties to the smallest id
inline int argmax_last_row(const Tensor& logits, int hi) {
    const int rows = logits.rows(), cols = logits.cols();
    require(0 < hi && hi <= cols, "argmax: range out of bounds");
    const double* row = logits.ptr() + static_cast<std::size_t>(rows - 1) * cols;
    int best = 0;
    for (int j = 1; j < hi; ++j)
        if (row[j] > row[best]) best = j;
    return best;
}

struct DecodeResult {
    std::array<int, 4> tokens{0, 0, 0, 0};
    bool eos_terminal = false;  // diagnostic: did the fifth step argmax to EOS?
};

// Four greedy steps with EOS excluded, then one diagnostic pass over the full
// vocabulary to see whether the model would terminate.
inline DecodeResult greedy_decode(ParamStore& ps, const Tensor& f_vl, const Tensor* pooled_text,
                                  QueryMode mode, const TokenVocab& vocab, int layers, int heads) {
    DecodeResult res;
    std::vector<int> prev;
    for (int step = 0; step < 4; ++step) {
        Tensor q = build_conditional_queries(ps, pooled_text, prev, mode, vocab);
        Tensor logits = head_logits(ps, decoder_forward(ps, f_vl, q, layers, heads));
        const int tok = argmax_last_row(logits, vocab.K);
        res.tokens[static_cast<std::size_t>(step)] = tok;
        prev.push_back(tok);
    }
    Tensor q = build_conditional_queries(ps, pooled_text, prev, mode, vocab);
    Tensor logits = head_logits(ps, decoder_forward(ps, f_vl, q, layers, heads));
    res.eos_terminal = argmax_last_row(logits, vocab.size()) == vocab.eos();
    return res;
}

}  // namespace mmtk
