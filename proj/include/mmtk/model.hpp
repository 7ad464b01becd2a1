// model.hpp
// Whole-model assembly: parameter registration across all modules and the
// end-to-end forward passes used by training and tracking.
#pragma once

#include "mmtk/config.hpp"
#include "mmtk/decoder.hpp"
#include "mmtk/fusion.hpp"
#include "mmtk/text.hpp"
#include "mmtk/vision.hpp"

namespace mmtk {

inline void init_model_params(ParamStore& ps, const TextVocab& vocab, const RunConfig& cfg) {
    add_text_params(ps, vocab, cfg.channels, cfg.text_layers, cfg.ffn_mult, cfg.seed);
    add_visual_params(ps, cfg.channels, cfg.patch, cfg.template_size, cfg.search_size,
                      cfg.vis_layers, cfg.ffn_mult, cfg.seed);
    add_fusion_params(ps, cfg.channels, cfg.dmodel, cfg.fuse_layers, cfg.ffn_mult, cfg.seed);
    add_query_params(ps, cfg.channels, cfg.dmodel, cfg.bins, cfg.query_mode, cfg.seed);
    add_decoder_params(ps, cfg.dmodel, cfg.dec_layers, cfg.ffn_mult, cfg.bins, cfg.seed);
}

struct EncodedContext {
    Tensor f_vl;    // (N_v + N_l) x d fused memory
    Tensor pooled;  // 1 x C sentence feature
};

inline EncodedContext encode_context(ParamStore& ps, const RunConfig& cfg, const Image& z,
                                     const Image& x, const std::string& caption,
                                     const TextVocab& vocab) {
    Tensor f_l = encode_text(ps, caption, vocab, cfg.text_layers, cfg.heads);
    Tensor f_v = encode_visual(ps, z, x, cfg.patch, cfg.vis_layers, cfg.heads);
    Tensor rv = reduce_channels(ps, "fuse.red_v", f_v);
    Tensor rl = reduce_channels(ps, "fuse.red_l", f_l);
    EncodedContext ctx;
    ctx.f_vl = fuse_vl(ps, rv, rl, cfg.fuse_layers, cfg.heads);
    ctx.pooled = pool_sentence(f_l);
    return ctx;
}

// Teacher-forced logits for all 5 target positions in one pass.
inline Tensor forward_train_logits(ParamStore& ps, const RunConfig& cfg, const TextVocab& vocab,
                                   const Image& z, const Image& x, const std::string& caption,
                                   const std::array<int, 4>& gt_tokens) {
    EncodedContext ctx = encode_context(ps, cfg, z, x, caption, vocab);
    TokenVocab tv(cfg.bins);
    std::vector<int> prev(gt_tokens.begin(), gt_tokens.end());
    const Tensor* pooled = cfg.query_mode == QueryMode::multi_cues ? &ctx.pooled : nullptr;
    Tensor queries = build_conditional_queries(ps, pooled, prev, cfg.query_mode, tv);
    Tensor hidden = decoder_forward(ps, ctx.f_vl, queries, cfg.dec_layers, cfg.heads);
    return head_logits(ps, hidden);
}

// Re-derives the expected parameter inventory for (vocab, cfg) and demands an
// exact match in names and shapes.
inline void check_param_shapes(const ParamStore& ps, const TextVocab& vocab, const RunConfig& cfg) {
    ParamStore expect;
    init_model_params(expect, vocab, cfg);
    for (const auto& [name, t] : expect.all()) {
        require(ps.has(name), "checkpoint is missing parameter '" + name + "'");
        require(ps.at(name).shape() == t.shape(),
                "parameter '" + name + "' has shape " + shape_str(ps.at(name).shape()) +
                    " but the config requires " + shape_str(t.shape()));
    }
    for (const auto& [name, t] : ps.all())
        require(expect.has(name), "parameter '" + name + "' does not belong to this config");
}

}  // namespace mmtk
