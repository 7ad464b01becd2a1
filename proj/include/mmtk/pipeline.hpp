// pipeline.hpp
// The tracker: crop geometry and frame<->search transforms, teacher-forced
// training, whole-video inference, evaluation, and the ablation harness.
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mmtk/bench.hpp"
#include "mmtk/model.hpp"

namespace mmtk {

// frame -> search mapping: s = (f - origin) * scale
struct CropTransform {
    double scale = 1.0;
    double ox = 0.0, oy = 0.0;
};

namespace detail {

inline double sample_bilinear(const Image& img, double y, double x, const double* fill, int c) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    auto value = [&](int yy, int xx) {
        if (yy < 0 || yy >= img.h || xx < 0 || xx >= img.w) return fill[c];
        return img.at(yy, xx, c);
    };
    const double top = value(y0, x0) * (1.0 - fx) + value(y0, x0 + 1) * fx;
    const double bot = value(y0 + 1, x0) * (1.0 - fx) + value(y0 + 1, x0 + 1) * fx;
    return top * (1.0 - fy) + bot * fy;
}

}  // namespace detail

struct CropResult {
    Image image;
    CropTransform transform;
};

// Square crop of side factor*sqrt(w*h) centered on the box, resized to
// out_size, out-of-frame area filled with the frame's mean color.
inline CropResult crop_region(const Image& frame, const Box& box, double factor, int out_size) {
    box.validate("crop_region");
    require(box.area() > 0.0, "crop_region: box has zero area");
    require(factor >= 1.0, "crop_region: context factor must be >= 1");
    require(out_size > 0, "crop_region: output size must be positive");

    const double side = factor * std::sqrt(box.w() * box.h());
    CropTransform t;
    t.scale = out_size / side;
    t.ox = box.cx() - side / 2.0;
    t.oy = box.cy() - side / 2.0;

    double fill[3] = {0.0, 0.0, 0.0};
    for (int y = 0; y < frame.h; ++y)
        for (int x = 0; x < frame.w; ++x)
            for (int c = 0; c < 3; ++c) fill[c] += frame.at(y, x, c);
    const double npix = static_cast<double>(frame.h) * frame.w;
    for (double& f : fill) f /= npix;

    Image out(out_size, out_size);
    for (int i = 0; i < out_size; ++i) {
        const double yf = t.oy + (i + 0.5) / t.scale - 0.5;
        for (int j = 0; j < out_size; ++j) {
            const double xf = t.ox + (j + 0.5) / t.scale - 0.5;
            for (int c = 0; c < 3; ++c) out.at(i, j, c) = detail::sample_bilinear(frame, yf, xf, fill, c);
        }
    }
    return {std::move(out), t};
}

inline Box box_frame_to_search(const Box& b, const CropTransform& t) {
    require(t.scale != 0.0, "box_frame_to_search: degenerate transform");
    Box c = b.to(BoxFormat::corner);
    Box mapped = Box::corner((c.v[0] - t.ox) * t.scale, (c.v[1] - t.oy) * t.scale,
                             (c.v[2] - t.ox) * t.scale, (c.v[3] - t.oy) * t.scale);
    return mapped.to(b.format);
}

inline Box box_search_to_frame(const Box& b, const CropTransform& t) {
    require(t.scale != 0.0, "box_search_to_frame: degenerate transform");
    Box c = b.to(BoxFormat::corner);
    Box mapped = Box::corner(c.v[0] / t.scale + t.ox, c.v[1] / t.scale + t.oy,
                             c.v[2] / t.scale + t.ox, c.v[3] / t.scale + t.oy);
    return mapped.to(b.format);
}

inline Box clamp_box(const Box& b, double lo_x, double lo_y, double hi_x, double hi_y) {
    Box c = b.to(BoxFormat::corner);
    Box clamped = Box::corner(std::clamp(c.v[0], lo_x, hi_x), std::clamp(c.v[1], lo_y, hi_y),
                              std::clamp(c.v[2], lo_x, hi_x), std::clamp(c.v[3], lo_y, hi_y));
    return clamped.to(b.format);
}

// Boxes can collapse during tracking; cropping needs positive area.
inline Box floor_box_size(const Box& b, double min_side) {
    Box c = b.to(BoxFormat::center);
    c.v[2] = std::max(c.v[2], min_side);
    c.v[3] = std::max(c.v[3], min_side);
    return c.to(b.format);
}

struct TrainSample {
    Image z, x;
    std::string caption;
    Box gt_search;  // corner format, search-crop pixels
};

using TrainBatch = std::vector<TrainSample>;

// A crop recipe: template frame, search frame, and a search-window offset in
// whole bins. Recipes are drawn once per run, so training revisits a finite
// pool of samples instead of an ever-fresh augmentation stream, and epochs can
// actually drive the loss to zero.
struct SampleSpec {
    int seq = 0;
    int tf = 0, sf = 0;
    int kx = 0, ky = 0;
};

// Offsets stay within +-kJitterBins bins of the ground-truth center, which
// covers the self-centering error seen when tracking from the previous
// prediction.
constexpr int kJitterBins = 15;

inline std::vector<SampleSpec> build_sample_specs(const std::vector<SyntheticSequence>& data,
                                                  const RunConfig& cfg) {
    require(!data.empty(), "sample specs: no sequences");
    const int J = std::min(kJitterBins, cfg.bins / 4);
    Rng rng(hash_combine(cfg.seed, hash_str("specs")));
    std::vector<SampleSpec> specs;
    for (int si = 0; si < static_cast<int>(data.size()); ++si) {
        const SyntheticSequence& seq = data[static_cast<std::size_t>(si)];
        require(!seq.frames.empty() && seq.frames.size() == seq.gt.size(),
                "sample specs: malformed sequence " + seq.name);
        const int n = static_cast<int>(seq.frames.size());
        for (int f = 0; f < n; ++f) {
            SampleSpec sp;
            sp.seq = si;
            sp.tf = rng.below_int(n);
            sp.sf = f;
            sp.kx = rng.below_int(2 * J) - J;
            sp.ky = rng.below_int(2 * J) - J;
            specs.push_back(sp);
        }
    }
    return specs;
}

// Builds the sample a recipe describes. The window offset is (k + 0.5) bins in
// search pixels, which keeps quantized coordinate labels clear of bin edges.
inline TrainSample make_train_sample(const std::vector<SyntheticSequence>& data,
                                     const RunConfig& cfg, const SampleSpec& sp) {
    const SyntheticSequence& seq = data.at(static_cast<std::size_t>(sp.seq));
    require(!seq.frames.empty() && seq.frames.size() == seq.gt.size(),
            "train sample: malformed sequence " + seq.name);

    TrainSample s;
    s.caption = seq.caption;
    const Box tz = floor_box_size(seq.gt[static_cast<std::size_t>(sp.tf)], 1.0);
    s.z = crop_region(seq.frames[static_cast<std::size_t>(sp.tf)], tz, cfg.factor_z, cfg.template_size)
              .image;

    const Box gt = seq.gt[static_cast<std::size_t>(sp.sf)];
    const Box gs = floor_box_size(gt, 1.0);
    const double side = cfg.factor_x * std::sqrt(gs.w() * gs.h());
    const double scale = cfg.search_size / side;
    const double binw = static_cast<double>(cfg.search_size) / cfg.bins;
    const double jx = (sp.kx + 0.5) * binw / scale;
    const double jy = (sp.ky + 0.5) * binw / scale;
    const Box jittered = Box::center(gs.cx() + jx, gs.cy() + jy, gs.w(), gs.h());
    CropResult crop =
        crop_region(seq.frames[static_cast<std::size_t>(sp.sf)], jittered, cfg.factor_x, cfg.search_size);
    s.x = std::move(crop.image);
    const double sz = cfg.search_size;
    s.gt_search = clamp_box(box_frame_to_search(gt.to(BoxFormat::corner), crop.transform), 0.0, 0.0,
                            sz, sz);
    return s;
}

inline TrainBatch sample_train_batch(const std::vector<SyntheticSequence>& data,
                                     const std::vector<SampleSpec>& specs, const RunConfig& cfg,
                                     Rng& rng) {
    require(!specs.empty(), "train batch: no sample specs");
    TrainBatch batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch));
    for (int i = 0; i < cfg.batch; ++i) {
        const int si = rng.below_int(static_cast<int>(specs.size()));
        batch.push_back(make_train_sample(data, cfg, specs[static_cast<std::size_t>(si)]));
    }
    return batch;
}

inline std::array<int, 4> sample_targets(const TrainSample& s, const RunConfig& cfg) {
    TokenVocab tv(cfg.bins);
    return box_to_tokens(s.gt_search.to(cfg.box_format), cfg.search_size, tv);
}

// Teacher-forced cross-entropy over all 5 positions, averaged over the batch;
// one optimizer step.
inline double train_step(ParamStore& ps, AdamW& opt, const TrainBatch& batch, const RunConfig& cfg,
                         const TextVocab& vocab) {
    require(!batch.empty(), "train_step: empty batch");
    TokenVocab tv(cfg.bins);
    Tensor total;
    for (const TrainSample& s : batch) {
        const std::array<int, 4> toks = sample_targets(s, cfg);
        Tensor logits = forward_train_logits(ps, cfg, vocab, s.z, s.x, s.caption, toks);
        std::vector<int> targets(toks.begin(), toks.end());
        targets.push_back(tv.eos());
        Tensor loss = cross_entropy_rows(logits, targets);
        total = total.defined() ? add(total, loss) : loss;
    }
    Tensor loss = scale(total, 1.0 / static_cast<double>(batch.size()));
    ps.zero_grad();
    backward(loss);
    opt.step(ps);
    const double value = loss.item();
    require(std::isfinite(value), "train_step: non-finite loss");
    return value;
}

// Fixed-step schedule with a single x0.1 learning-rate drop at 5/6 of the run.
inline std::vector<double> train_loop(ParamStore& ps, AdamW& opt,
                                      const std::vector<SyntheticSequence>& data,
                                      const RunConfig& cfg, const TextVocab& vocab,
                                      const std::function<void(int, double)>& on_step = nullptr) {
    Rng rng(hash_combine(cfg.seed, hash_str("train")));
    const std::vector<SampleSpec> specs = build_sample_specs(data, cfg);
    const int drop_at = cfg.steps * 5 / 6;
    std::vector<double> losses;
    losses.reserve(static_cast<std::size_t>(cfg.steps));
    for (int step = 0; step < cfg.steps; ++step) {
        if (step == drop_at && drop_at > 0) opt.set_lr(opt.hyper().lr * 0.1);
        TrainBatch batch = sample_train_batch(data, specs, cfg, rng);
        const double loss = train_step(ps, opt, batch, cfg, vocab);
        losses.push_back(loss);
        if (on_step) on_step(step, loss);
    }
    return losses;
}

// Track one video. output[0] = init_box; each later frame searches around the
// previous prediction. The caption is encoded once per call.
inline std::vector<Box> track_video(ParamStore& ps, const RunConfig& cfg, const TextVocab& vocab,
                                    const std::vector<Image>& frames, const std::string& caption,
                                    const Box& init_box) {
    require(!frames.empty(), "track_video: no frames");
    init_box.validate("track_video");
    require(init_box.area() > 0.0, "track_video: init box has zero area");

    TokenVocab tv(cfg.bins);
    const Box tz = init_box.to(BoxFormat::corner);
    Image templ = crop_region(frames[0], tz, cfg.factor_z, cfg.template_size).image;

    std::vector<Box> out;
    out.reserve(frames.size());
    out.push_back(tz);
    Box prev = tz;
    for (std::size_t t = 1; t < frames.size(); ++t) {
        const Box center_on = floor_box_size(prev, 1.0);
        CropResult crop = crop_region(frames[t], center_on, cfg.factor_x, cfg.search_size);
        EncodedContext ctx = encode_context(ps, cfg, templ, crop.image, caption, vocab);
        const Tensor* pooled = cfg.query_mode == QueryMode::multi_cues ? &ctx.pooled : nullptr;
        DecodeResult dec =
            greedy_decode(ps, ctx.f_vl, pooled, cfg.query_mode, tv, cfg.dec_layers, cfg.heads);
        Box in_search = tokens_to_box(dec.tokens, cfg.search_size, tv, cfg.box_format);
        Box in_frame = box_search_to_frame(in_search, crop.transform).to(BoxFormat::corner);
        in_frame = clamp_box(in_frame, 0.0, 0.0, frames[t].w, frames[t].h);
        out.push_back(in_frame);
        prev = in_frame;
    }
    return out;
}

inline MetricsReport evaluate_tracker(ParamStore& ps, const RunConfig& cfg, const TextVocab& vocab,
                                      const std::vector<SyntheticSequence>& data) {
    require(!data.empty(), "evaluate_tracker: no sequences");
    std::vector<EvalSequence> evals;
    evals.reserve(data.size());
    for (const SyntheticSequence& seq : data) {
        EvalSequence e;
        e.name = seq.name;
        e.attributes = seq.attributes;
        e.gt = seq.gt;
        e.pred = track_video(ps, cfg, vocab, seq.frames, seq.caption, seq.gt.front());
        evals.push_back(std::move(e));
    }
    return evaluate_predictions(evals, cfg.precision_px);
}

// Finite-difference audit of the full model: one deterministic sample pushed
// end to end, every parameter group checked.
inline GradCheckReport model_gradient_check(const RunConfig& cfg, int samples_per_param) {
    const std::vector<std::string> corpus = {"the red square moving among other shapes",
                                             "a blue circle drifting across the scene"};
    TextVocab vocab = build_vocab(corpus);
    ParamStore ps;
    init_model_params(ps, vocab, cfg);

    Rng rng(hash_combine(cfg.seed, hash_str("gradcheck")));
    Image z(cfg.template_size, cfg.template_size);
    Image x(cfg.search_size, cfg.search_size);
    for (double& v : z.pix) v = rng.uniform();
    for (double& v : x.pix) v = rng.uniform();
    std::array<int, 4> toks{};
    for (int& t : toks) t = rng.below_int(cfg.bins);
    TokenVocab tv(cfg.bins);
    std::vector<int> targets(toks.begin(), toks.end());
    targets.push_back(tv.eos());

    auto loss_fn = [&]() {
        Tensor logits = forward_train_logits(ps, cfg, vocab, z, x, corpus[0], toks);
        return cross_entropy_rows(logits, targets);
    };
    Rng pick(hash_combine(cfg.seed, hash_str("gradcheck-pick")));
    return gradient_check(ps, loss_fn, samples_per_param, pick);
}

struct AblationRow {
    int bins = 0;
    BoxFormat box_format = BoxFormat::corner;
    QueryMode query_mode = QueryMode::multi_cues;
    double auc = 0.0, norm_precision = 0.0, precision = 0.0;
};

struct AblationAxes {
    std::vector<int> bins;
    std::vector<BoxFormat> formats;
    std::vector<QueryMode> modes;
};

// One-axis-at-a-time sweep off the base config. Every row records all three
// axis values alongside its scores; each cell trains from scratch with the
// shared seed and evaluates on the provided data.
inline std::vector<AblationRow> run_ablation(const RunConfig& base, const AblationAxes& axes,
                                             const std::vector<SyntheticSequence>& data) {
    std::vector<RunConfig> cells;
    for (int k : axes.bins) {
        RunConfig c = base;
        c.bins = k;
        cells.push_back(c);
    }
    for (BoxFormat f : axes.formats) {
        RunConfig c = base;
        c.box_format = f;
        cells.push_back(c);
    }
    for (QueryMode m : axes.modes) {
        RunConfig c = base;
        c.query_mode = m;
        cells.push_back(c);
    }

    std::vector<std::string> corpus;
    for (const SyntheticSequence& s : data) corpus.push_back(s.caption);

    std::vector<AblationRow> rows;
    for (const RunConfig& cfg : cells) {
        validate_config(cfg);
        TextVocab vocab = build_vocab(corpus);
        ParamStore ps;
        init_model_params(ps, vocab, cfg);
        AdamW opt(optim_hyper(cfg));
        train_loop(ps, opt, data, cfg, vocab);
        MetricsReport rep = evaluate_tracker(ps, cfg, vocab, data);
        AblationRow row;
        row.bins = cfg.bins;
        row.box_format = cfg.box_format;
        row.query_mode = cfg.query_mode;
        row.auc = rep.auc;
        row.norm_precision = rep.norm_precision;
        row.precision = rep.precision;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace mmtk
