// vision.hpp
// RGB image container, patch embedding, and the joint template/search encoder.
#pragma once

#include <string>
#include <vector>

#include "mmtk/nn.hpp"

namespace mmtk {

// Interleaved RGB, values in [0,1], row-major.
struct Image {
    int h = 0;
    int w = 0;
    std::vector<double> pix;

    Image() = default;
    Image(int height, int width, double r = 0.0, double g = 0.0, double b = 0.0)
        : h(height), w(width), pix(static_cast<std::size_t>(height) * width * 3) {
        require(height > 0 && width > 0, "image: dimensions must be positive");
        for (std::size_t i = 0; i < pix.size(); i += 3) {
            pix[i] = r;
            pix[i + 1] = g;
            pix[i + 2] = b;
        }
    }

    double at(int y, int x, int c) const { return pix[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }
    double& at(int y, int x, int c) { return pix[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }

    void set(int y, int x, double r, double g, double b) {
        at(y, x, 0) = r;
        at(y, x, 1) = g;
        at(y, x, 2) = b;
    }
};

inline int patch_tokens(int size, int patch) {
    require(patch > 0 && size > 0 && size % patch == 0,
            "patchify: image size " + std::to_string(size) + " not divisible by patch " +
                std::to_string(patch));
    return (size / patch) * (size / patch);
}

// Positional tables are trainable but start as a 2D sinusoid so attention can
// discriminate locations from the first step.
inline void add_visual_params(ParamStore& ps, int channels, int patch, int template_size,
                              int search_size, int layers, int ffn_mult, std::uint64_t seed) {
    ps.add("vis.proj.w", init_trunc_normal({3 * patch * patch, channels}, seed, "vis.proj.w"));
    ps.add("vis.proj.b", Tensor::zeros({channels}));
    ps.add("vis.pos_z", grid_sine_positions(template_size / patch, template_size / patch, channels));
    ps.add("vis.pos_x", grid_sine_positions(search_size / patch, search_size / patch, channels));
    add_encoder(ps, "vis.enc", channels, layers, ffn_mult, seed);
}

// Raster-order patches, each flattened (y, x, rgb) and linearly projected,
// plus the learnable positional table named by pos_name.
inline Tensor patchify(ParamStore& ps, const Image& img, int patch, const std::string& pos_name) {
    require(patch > 0 && img.h > 0 && img.h % patch == 0 && img.w > 0 && img.w % patch == 0,
            "patchify: image " + std::to_string(img.w) + "x" + std::to_string(img.h) +
                " not divisible by patch " + std::to_string(patch));
    const int tokens = (img.h / patch) * (img.w / patch);
    const int plen = 3 * patch * patch;
    Tensor flat = Tensor::zeros({tokens, plen});
    int row = 0;
    for (int py = 0; py < img.h; py += patch) {
        for (int px = 0; px < img.w; px += patch) {
            double* dst = flat.ptr() + static_cast<std::size_t>(row) * plen;
            int k = 0;
            for (int y = py; y < py + patch; ++y)
                for (int x = px; x < px + patch; ++x)
                    for (int c = 0; c < 3; ++c) dst[k++] = img.at(y, x, c);
            ++row;
        }
    }
    Tensor proj = add_rowvec(matmul(flat, ps.at("vis.proj.w")), ps.at("vis.proj.b"));
    const Tensor& pos = ps.at(pos_name);
    require(pos.rows() == tokens, "patchify: positional table " + pos_name + " holds " +
                                      std::to_string(pos.rows()) + " rows, need " +
                                      std::to_string(tokens));
    return add(proj, pos);
}

// N_v x C joint features: template tokens then search tokens, attended together.
inline Tensor encode_visual(ParamStore& ps, const Image& z, const Image& x, int patch, int layers,
                            int heads) {
    Tensor tz = patchify(ps, z, patch, "vis.pos_z");
    Tensor tx = patchify(ps, x, patch, "vis.pos_x");
    return encoder_forward(ps, "vis.enc", concat_rows({tz, tx}), layers, heads);
}

}  // namespace mmtk
