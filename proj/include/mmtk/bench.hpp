// bench.hpp
// Deterministic synthetic tracking benchmark (moving colored shapes with
// captions) and the standard evaluation metrics.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "mmtk/seqtok.hpp"
#include "mmtk/vision.hpp"

namespace mmtk {

struct PaletteColor {
    const char* name;
    double r, g, b;
};

inline const std::array<PaletteColor, 6>& palette() {
    static const std::array<PaletteColor, 6> p = {{{"red", 0.9, 0.1, 0.1},
                                                   {"green", 0.1, 0.75, 0.15},
                                                   {"blue", 0.15, 0.25, 0.9},
                                                   {"yellow", 0.9, 0.85, 0.1},
                                                   {"magenta", 0.85, 0.15, 0.8},
                                                   {"cyan", 0.1, 0.8, 0.85}}};
    return p;
}

inline const std::array<const char*, 3>& shape_names() {
    static const std::array<const char*, 3> s = {"circle", "square", "triangle"};
    return s;
}

inline const std::array<const char*, 4>& caption_templates() {
    static const std::array<const char*, 4> t = {"the {c} {s} moving among other shapes",
                                                 "a {c} {s} drifting across the scene",
                                                 "track the {c} {s} as it moves",
                                                 "follow the moving {c} {s}"};
    return t;
}

inline std::string render_caption(int template_id, const std::string& color,
                                  const std::string& shape) {
    require(0 <= template_id && template_id < static_cast<int>(caption_templates().size()),
            "caption: bad template id");
    std::string s = caption_templates()[static_cast<std::size_t>(template_id)];
    s.replace(s.find("{c}"), 3, color);
    s.replace(s.find("{s}"), 3, shape);
    return s;
}

struct SyntheticSequence {
    std::string name;
    std::vector<Image> frames;
    std::vector<Box> gt;  // corner format, frame pixels
    std::string caption;
    std::vector<std::string> attributes;  // sorted tags
    std::uint64_t seed = 0;
    int template_id = 0;
    std::string target_color, target_shape;
    std::string difficulty;
};

namespace detail {

struct SceneObject {
    int color = 0, shape = 0;
    double x = 0, y = 0, vx = 0, vy = 0;
    double size = 16;  // diameter, px
    double scale_amp = 0.0;
    double scale_phase = 0.0;
};

inline void draw_shape(Image& img, int shape, double cx, double cy, double size,
                       const PaletteColor& col) {
    const double r = size / 2.0;
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
    const int y1 = std::min(img.h - 1, static_cast<int>(std::ceil(cy + r)));
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
    const int x1 = std::min(img.w - 1, static_cast<int>(std::ceil(cx + r)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            bool inside = false;
            if (shape == 0) {
                inside = (px - cx) * (px - cx) + (py - cy) * (py - cy) <= r * r;
            } else if (shape == 1) {
                inside = std::abs(px - cx) <= r && std::abs(py - cy) <= r;
            } else {
                const double down = py - (cy - r);  // apex at the top
                inside = down >= 0.0 && down <= 2.0 * r && std::abs(px - cx) <= r * down / (2.0 * r);
            }
            if (inside) img.set(y, x, col.r, col.g, col.b);
        }
    }
}

inline Image value_noise_background(int size, Rng& rng) {
    constexpr int grid = 8;
    std::array<double, (grid + 1) * (grid + 1)> nodes;
    for (double& v : nodes) v = rng.uniform(0.25, 0.5);
    Image img(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double gx = static_cast<double>(x) / size * grid;
            const double gy = static_cast<double>(y) / size * grid;
            const int ix = std::min(grid - 1, static_cast<int>(gx));
            const int iy = std::min(grid - 1, static_cast<int>(gy));
            const double fx = gx - ix, fy = gy - iy;
            const double v00 = nodes[static_cast<std::size_t>(iy) * (grid + 1) + ix];
            const double v01 = nodes[static_cast<std::size_t>(iy) * (grid + 1) + ix + 1];
            const double v10 = nodes[static_cast<std::size_t>(iy + 1) * (grid + 1) + ix];
            const double v11 = nodes[static_cast<std::size_t>(iy + 1) * (grid + 1) + ix + 1];
            const double v = (v00 * (1 - fx) + v01 * fx) * (1 - fy) + (v10 * (1 - fx) + v11 * fx) * fy;
            img.set(y, x, v, v, v);
        }
    }
    return img;
}

}  // namespace detail

inline std::vector<SyntheticSequence> generate_dataset(int n, std::uint64_t seed,
                                                       const std::string& difficulty,
                                                       int frame_size, int length) {
    require(n >= 1, "generate_dataset: need at least one sequence");
    require(difficulty == "easy" || difficulty == "hard",
            "generate_dataset: difficulty must be easy or hard");
    require(frame_size >= 48, "generate_dataset: frame size too small for the shape range");
    require(length >= 1, "generate_dataset: length must be positive");
    const bool hard = difficulty == "hard";

    std::vector<SyntheticSequence> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int idx = 0; idx < n; ++idx) {
        Rng rng(hash_combine(seed, static_cast<std::uint64_t>(idx)));
        SyntheticSequence seq;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "seq_%04d", idx);
        seq.name = buf;
        seq.seed = seed;
        seq.difficulty = difficulty;

        const bool scale_var = rng.uniform() < 0.5;
        const bool fast = rng.uniform() < 0.5;
        const bool want_distractor = hard && rng.uniform() < 0.5;
        const bool want_occlusion = hard && length >= 8 && rng.uniform() < 0.5;

        int count = 1 + rng.below_int(4);
        if ((want_distractor || want_occlusion) && count < 2) count = 2;

        std::vector<detail::SceneObject> objs(static_cast<std::size_t>(count));
        detail::SceneObject& target = objs[0];
        target.color = rng.below_int(6);
        target.shape = rng.below_int(3);
        for (int j = 1; j < count; ++j) {
            detail::SceneObject& o = objs[static_cast<std::size_t>(j)];
            if (want_distractor && j == 1) {
                // shares exactly one of color/shape, so the caption stays unique
                if (rng.uniform() < 0.5) {
                    o.color = target.color;
                    o.shape = (target.shape + 1 + rng.below_int(2)) % 3;
                } else {
                    o.shape = target.shape;
                    o.color = (target.color + 1 + rng.below_int(5)) % 6;
                }
            } else {
                o.color = (target.color + 1 + rng.below_int(5)) % 6;
                o.shape = (target.shape + 1 + rng.below_int(2)) % 3;
            }
        }

        const double vmax = fast ? 6.0 : 2.5;
        const double accel = fast ? 1.2 : 0.35;
        for (int j = 0; j < count; ++j) {
            detail::SceneObject& o = objs[static_cast<std::size_t>(j)];
            o.size = rng.uniform(8.0, 32.0);
            if (scale_var && j == 0) {
                o.scale_amp = 0.3;
                o.scale_phase = rng.uniform(0.0, 6.283185307179586);
            }
            const double margin = o.size * (1.0 + o.scale_amp) / 2.0 + 2.0;
            for (int attempt = 0; attempt < 200; ++attempt) {
                o.x = rng.uniform(margin, frame_size - margin);
                o.y = rng.uniform(margin, frame_size - margin);
                bool clear = true;
                for (int k = 0; k < j; ++k) {
                    const double dx = o.x - objs[static_cast<std::size_t>(k)].x;
                    const double dy = o.y - objs[static_cast<std::size_t>(k)].y;
                    if (dx * dx + dy * dy < 28.0 * 28.0) clear = false;
                }
                if (clear) break;
            }
            const double speed = fast ? rng.uniform(3.0, 6.0) : rng.uniform(0.5, 2.5);
            const double angle = rng.uniform(0.0, 6.283185307179586);
            o.vx = speed * std::cos(angle);
            o.vy = speed * std::sin(angle);
        }

        const int occluder = want_occlusion ? count - 1 : -1;
        int occl_t0 = 0;
        if (want_occlusion) occl_t0 = 1 + rng.below_int(std::max(1, length - 6));

        const Image background = detail::value_noise_background(frame_size, rng);
        const double period = std::max(8.0, length / 2.0);

        for (int t = 0; t < length; ++t) {
            if (t > 0) {
                for (detail::SceneObject& o : objs) {
                    o.vx = std::clamp(o.vx + rng.uniform(-accel, accel), -vmax, vmax);
                    o.vy = std::clamp(o.vy + rng.uniform(-accel, accel), -vmax, vmax);
                    o.x += o.vx;
                    o.y += o.vy;
                    const double margin = o.size * (1.0 + o.scale_amp) / 2.0 + 2.0;
                    const double hi_x = frame_size - margin, hi_y = frame_size - margin;
                    if (o.x < margin) { o.x = 2.0 * margin - o.x; o.vx = std::abs(o.vx); }
                    if (o.x > hi_x) { o.x = 2.0 * hi_x - o.x; o.vx = -std::abs(o.vx); }
                    if (o.y < margin) { o.y = 2.0 * margin - o.y; o.vy = std::abs(o.vy); }
                    if (o.y > hi_y) { o.y = 2.0 * hi_y - o.y; o.vy = -std::abs(o.vy); }
                }
            }

            std::vector<std::array<double, 3>> draw_pos(objs.size());
            for (std::size_t j = 0; j < objs.size(); ++j) {
                const detail::SceneObject& o = objs[j];
                double size = o.size;
                if (o.scale_amp > 0.0)
                    size = o.size * (1.0 + o.scale_amp * std::sin(6.283185307179586 * t / period +
                                                                  o.scale_phase));
                draw_pos[j] = {o.x, o.y, size};
            }
            if (occluder >= 0 && t >= occl_t0 && t < occl_t0 + 5) {
                // steer the occluder through the target's center, peak overlap mid-window
                const int k = t - occl_t0;
                const double alpha = 1.0 - std::abs(k - 2) / 2.0;
                auto& op = draw_pos[static_cast<std::size_t>(occluder)];
                op[0] = op[0] * (1.0 - alpha) + draw_pos[0][0] * alpha;
                op[1] = op[1] * (1.0 - alpha) + draw_pos[0][1] * alpha;
            }

            Image frame = background;
            // non-target objects first, target on top, occluder above the target
            for (std::size_t j = 1; j < objs.size(); ++j) {
                if (static_cast<int>(j) == occluder) continue;
                const detail::SceneObject& o = objs[j];
                detail::draw_shape(frame, o.shape, draw_pos[j][0], draw_pos[j][1], draw_pos[j][2],
                                   palette()[static_cast<std::size_t>(o.color)]);
            }
            detail::draw_shape(frame, target.shape, draw_pos[0][0], draw_pos[0][1], draw_pos[0][2],
                               palette()[static_cast<std::size_t>(target.color)]);
            if (occluder >= 0) {
                const detail::SceneObject& o = objs[static_cast<std::size_t>(occluder)];
                detail::draw_shape(frame, o.shape, draw_pos[static_cast<std::size_t>(occluder)][0],
                                   draw_pos[static_cast<std::size_t>(occluder)][1],
                                   draw_pos[static_cast<std::size_t>(occluder)][2],
                                   palette()[static_cast<std::size_t>(o.color)]);
            }
            seq.frames.push_back(std::move(frame));

            const double r = draw_pos[0][2] / 2.0;
            seq.gt.push_back(Box::corner(draw_pos[0][0] - r, draw_pos[0][1] - r,
                                         draw_pos[0][0] + r, draw_pos[0][1] + r));
        }

        seq.template_id = rng.below_int(static_cast<int>(caption_templates().size()));
        seq.target_color = palette()[static_cast<std::size_t>(target.color)].name;
        seq.target_shape = shape_names()[static_cast<std::size_t>(target.shape)];
        seq.caption = render_caption(seq.template_id, seq.target_color, seq.target_shape);

        if (scale_var) seq.attributes.push_back("scale-variation");
        if (fast) seq.attributes.push_back("fast-motion");
        if (want_distractor) seq.attributes.push_back("distractor");
        if (want_occlusion) seq.attributes.push_back("occlusion");
        std::sort(seq.attributes.begin(), seq.attributes.end());

        out.push_back(std::move(seq));
    }
    return out;
}

inline double iou(const Box& a, const Box& b) {
    a.validate("iou");
    b.validate("iou");
    const double ix = std::max(0.0, std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1()));
    const double iy = std::max(0.0, std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1()));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni <= 0.0 ? 0.0 : inter / uni;
}

// Mean over 21 thresholds {0, 0.05, ..., 1.0} of fraction(iou > threshold).
inline double success_auc(const std::vector<double>& ious) {
    require(!ious.empty(), "success_auc: empty iou list");
    double total = 0.0;
    for (int i = 0; i <= 20; ++i) {
        const double tau = i / 20.0;
        int pass = 0;
        for (double v : ious)
            if (v > tau) ++pass;
        total += static_cast<double>(pass) / static_cast<double>(ious.size());
    }
    return total / 21.0;
}

using Center = std::array<double, 2>;

inline std::vector<Center> centers_of(const std::vector<Box>& boxes) {
    std::vector<Center> c;
    c.reserve(boxes.size());
    for (const Box& b : boxes) c.push_back({b.cx(), b.cy()});
    return c;
}

// Fraction of frames whose center error is <= threshold (inclusive).
inline double precision_score(const std::vector<Center>& pred, const std::vector<Center>& gt,
                              double threshold_px = 20.0) {
    require(pred.size() == gt.size() && !pred.empty(),
            "precision_score: need equal non-empty center lists");
    int pass = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double dx = pred[i][0] - gt[i][0];
        const double dy = pred[i][1] - gt[i][1];
        if (std::sqrt(dx * dx + dy * dy) <= threshold_px) ++pass;
    }
    return static_cast<double>(pass) / static_cast<double>(pred.size());
}

// Center error normalized by ground-truth size, swept over 51 thresholds
// {0, 0.01, ..., 0.5} with fraction(error <= threshold).
inline double normalized_precision(const std::vector<Box>& pred, const std::vector<Box>& gt) {
    require(pred.size() == gt.size() && !pred.empty(),
            "normalized_precision: need equal non-empty box lists");
    std::vector<double> err;
    err.reserve(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        require(gt[i].w() > 0.0 && gt[i].h() > 0.0,
                "normalized_precision: degenerate ground-truth box at frame " + std::to_string(i));
        const double ex = (pred[i].cx() - gt[i].cx()) / gt[i].w();
        const double ey = (pred[i].cy() - gt[i].cy()) / gt[i].h();
        err.push_back(std::sqrt(ex * ex + ey * ey));
    }
    double total = 0.0;
    for (int i = 0; i <= 50; ++i) {
        const double tau = i / 100.0;
        int pass = 0;
        for (double e : err)
            if (e <= tau) ++pass;
        total += static_cast<double>(pass) / static_cast<double>(err.size());
    }
    return total / 51.0;
}

struct SequenceScores {
    std::string name;
    double auc = 0.0, precision = 0.0, norm_precision = 0.0;
    std::vector<std::string> attributes;
};

struct AttributeScores {
    double auc = 0.0, precision = 0.0, norm_precision = 0.0;
    int count = 0;
};

struct MetricsReport {
    double auc = 0.0, precision = 0.0, norm_precision = 0.0;
    std::vector<SequenceScores> per_sequence;
    std::map<std::string, AttributeScores> per_attribute;
};

struct EvalSequence {
    std::string name;
    std::vector<Box> pred, gt;
    std::vector<std::string> attributes;
};

inline MetricsReport evaluate_predictions(const std::vector<EvalSequence>& seqs,
                                          double precision_px = 20.0) {
    require(!seqs.empty(), "evaluate: no sequences");
    MetricsReport rep;
    for (const EvalSequence& s : seqs) {
        require(s.pred.size() == s.gt.size() && !s.pred.empty(),
                "evaluate: prediction/ground-truth length mismatch in " + s.name);
        std::vector<double> ious;
        ious.reserve(s.pred.size());
        for (std::size_t i = 0; i < s.pred.size(); ++i) ious.push_back(iou(s.pred[i], s.gt[i]));
        SequenceScores sc;
        sc.name = s.name;
        sc.attributes = s.attributes;
        sc.auc = success_auc(ious);
        sc.precision = precision_score(centers_of(s.pred), centers_of(s.gt), precision_px);
        sc.norm_precision = normalized_precision(s.pred, s.gt);
        rep.per_sequence.push_back(std::move(sc));
    }
    for (const SequenceScores& sc : rep.per_sequence) {
        rep.auc += sc.auc;
        rep.precision += sc.precision;
        rep.norm_precision += sc.norm_precision;
        for (const std::string& tag : sc.attributes) {
            AttributeScores& a = rep.per_attribute[tag];
            a.auc += sc.auc;
            a.precision += sc.precision;
            a.norm_precision += sc.norm_precision;
            a.count += 1;
        }
    }
    const double n = static_cast<double>(rep.per_sequence.size());
    rep.auc /= n;
    rep.precision /= n;
    rep.norm_precision /= n;
    for (auto& [tag, a] : rep.per_attribute) {
        a.auc /= a.count;
        a.precision /= a.count;
        a.norm_precision /= a.count;
    }
    return rep;
}

// Per-threshold success fractions averaged over sequences (for curves.csv).
inline std::vector<double> success_curve(const std::vector<EvalSequence>& seqs) {
    require(!seqs.empty(), "success_curve: no sequences");
    std::vector<double> curve(21, 0.0);
    for (const EvalSequence& s : seqs) {
        require(s.pred.size() == s.gt.size() && !s.pred.empty(),
                "success_curve: prediction/ground-truth length mismatch in " + s.name);
        for (int i = 0; i <= 20; ++i) {
            const double tau = i / 20.0;
            int pass = 0;
            for (std::size_t f = 0; f < s.pred.size(); ++f)
                if (iou(s.pred[f], s.gt[f]) > tau) ++pass;
            curve[static_cast<std::size_t>(i)] +=
                static_cast<double>(pass) / static_cast<double>(s.pred.size());
        }
    }
    for (double& v : curve) v /= static_cast<double>(seqs.size());
    return curve;
}

}  // namespace mmtk
