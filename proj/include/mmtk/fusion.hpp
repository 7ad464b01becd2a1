// fusion.hpp
// Channel reduction C -> d for both streams and the gated multi-modal fusion
// over the concatenated sequence.
#pragma once

#include "mmtk/nn.hpp"

namespace mmtk {

inline void add_fusion_params(ParamStore& ps, int channels, int d, int layers, int ffn_mult,
                              std::uint64_t seed) {
    add_linear(ps, "fuse.red_v", channels, d, seed);
    add_linear(ps, "fuse.red_l", channels, d, seed);
    add_encoder(ps, "fuse.enc", d, layers, ffn_mult, seed);
}

// Per-row affine C -> d; name selects the visual or text parameter set.
inline Tensor reduce_channels(ParamStore& ps, const std::string& name, const Tensor& f) {
    return linear(ps, name, f);
}

// (N_v + N_l) x d unified representation: concatenate the reduced streams,
// gate elementwise with sigmoid of the shared encoder's output, multiply.
// force_gate_one bypasses the gate so tests can observe pure concatenation.
inline Tensor fuse_vl(ParamStore& ps, const Tensor& f_v_reduced, const Tensor& f_l_reduced,
                      int layers, int heads, bool force_gate_one = false) {
    require(f_v_reduced.cols() == f_l_reduced.cols(),
            "fuse_vl: stream widths disagree, " + shape_str(f_v_reduced.shape()) + " vs " +
                shape_str(f_l_reduced.shape()));
    Tensor joint = concat_rows({f_v_reduced, f_l_reduced});
    if (force_gate_one) return joint;
    Tensor gate = sigmoid(encoder_forward(ps, "fuse.enc", joint, layers, heads));
    return mul(gate, joint);
}

}  // namespace mmtk
