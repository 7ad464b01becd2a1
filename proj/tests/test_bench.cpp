#include <gtest/gtest.h>

#include <cmath>

#include "mmtk/bench.hpp"

using namespace mmtk;

namespace {

Box random_dyadic_box(Rng& rng, double span) {
    // quarter-pixel coordinates stay exact under translation by integers
    const double x1 = rng.below_int(static_cast<int>(span * 4)) / 4.0;
    const double y1 = rng.below_int(static_cast<int>(span * 4)) / 4.0;
    const double w = (1 + rng.below_int(static_cast<int>(span))) / 4.0 + 1.0;
    const double h = (1 + rng.below_int(static_cast<int>(span))) / 4.0 + 1.0;
    return Box::corner(x1, y1, x1 + w, y1 + h);
}

Box shift(const Box& b, double dx, double dy) {
    Box c = b.to(BoxFormat::corner);
    return Box::corner(c.v[0] + dx, c.v[1] + dy, c.v[2] + dx, c.v[3] + dy);
}

}  // namespace

TEST(Generator, SameSeedByteIdentical) {
    auto a = generate_dataset(3, 17, "easy", 64, 4);
    auto b = generate_dataset(3, 17, "easy", 64, 4);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].caption, b[i].caption);
        EXPECT_EQ(a[i].attributes, b[i].attributes);
        ASSERT_EQ(a[i].frames.size(), b[i].frames.size());
        for (std::size_t t = 0; t < a[i].frames.size(); ++t)
            ASSERT_EQ(a[i].frames[t].pix, b[i].frames[t].pix) << "seq " << i << " frame " << t;
        for (std::size_t t = 0; t < a[i].gt.size(); ++t)
            for (int k = 0; k < 4; ++k) ASSERT_DOUBLE_EQ(a[i].gt[t].v[k], b[i].gt[t].v[k]);
    }
    auto c = generate_dataset(3, 18, "easy", 64, 4);
    EXPECT_NE(a[0].frames[0].pix, c[0].frames[0].pix);
}

TEST(Generator, ShapeAndBoundsInvariants) {
    auto seqs = generate_dataset(4, 5, "easy", 64, 6);
    ASSERT_EQ(seqs.size(), 4u);
    for (const auto& s : seqs) {
        EXPECT_EQ(s.frames.size(), 6u);
        EXPECT_EQ(s.gt.size(), 6u);
        for (const auto& f : s.frames) {
            EXPECT_EQ(f.h, 64);
            EXPECT_EQ(f.w, 64);
        }
        for (const Box& b : s.gt) {
            EXPECT_GT(b.area(), 0.0);
            EXPECT_GE(b.x1(), 0.0);
            EXPECT_GE(b.y1(), 0.0);
            EXPECT_LE(b.x2(), 64.0);
            EXPECT_LE(b.y2(), 64.0);
        }
    }
}

TEST(Generator, EasyHasNoHardAttributes) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        auto seqs = generate_dataset(4, seed, "easy", 64, 8);
        for (const auto& s : seqs)
            for (const std::string& tag : s.attributes) {
                EXPECT_NE(tag, "distractor");
                EXPECT_NE(tag, "occlusion");
            }
    }
}

TEST(Generator, HardAttributesFromKnownSetAndSorted) {
    auto seqs = generate_dataset(12, 3, "hard", 64, 10);
    bool saw_hard_tag = false;
    for (const auto& s : seqs) {
        EXPECT_TRUE(std::is_sorted(s.attributes.begin(), s.attributes.end()));
        for (const std::string& tag : s.attributes) {
            EXPECT_TRUE(tag == "scale-variation" || tag == "fast-motion" || tag == "distractor" ||
                        tag == "occlusion")
                << tag;
            if (tag == "distractor" || tag == "occlusion") saw_hard_tag = true;
        }
    }
    EXPECT_TRUE(saw_hard_tag);
}

TEST(Generator, CaptionNamesTheTarget) {
    auto seqs = generate_dataset(6, 11, "easy", 64, 3);
    for (const auto& s : seqs) {
        EXPECT_EQ(s.caption, render_caption(s.template_id, s.target_color, s.target_shape));
        EXPECT_NE(s.caption.find(s.target_color), std::string::npos);
        EXPECT_NE(s.caption.find(s.target_shape), std::string::npos);
    }
}

TEST(Generator, TargetDrawnAtGroundTruthCenter) {
    auto seqs = generate_dataset(5, 23, "easy", 64, 2);
    for (const auto& s : seqs) {
        const PaletteColor* col = nullptr;
        for (const PaletteColor& p : palette())
            if (s.target_color == p.name) col = &p;
        ASSERT_NE(col, nullptr);
        for (std::size_t t = 0; t < s.frames.size(); ++t) {
            const int y = static_cast<int>(std::llround(s.gt[t].cy() - 0.5));
            const int x = static_cast<int>(std::llround(s.gt[t].cx() - 0.5));
            EXPECT_DOUBLE_EQ(s.frames[t].at(y, x, 0), col->r);
            EXPECT_DOUBLE_EQ(s.frames[t].at(y, x, 1), col->g);
            EXPECT_DOUBLE_EQ(s.frames[t].at(y, x, 2), col->b);
        }
    }
}

TEST(Generator, Validation) {
    EXPECT_THROW(generate_dataset(0, 1, "easy", 64, 4), Error);
    EXPECT_THROW(generate_dataset(1, 1, "medium", 64, 4), Error);
    EXPECT_THROW(generate_dataset(1, 1, "easy", 32, 4), Error);
    EXPECT_THROW(generate_dataset(1, 1, "easy", 64, 0), Error);
}

TEST(RenderCaption, TemplateSubstitution) {
    EXPECT_EQ(render_caption(0, "red", "square"), "the red square moving among other shapes");
    EXPECT_EQ(render_caption(1, "cyan", "triangle"), "a cyan triangle drifting across the scene");
    EXPECT_THROW(render_caption(99, "red", "square"), Error);
}

TEST(Iou, HandExamples) {
    Box a = Box::corner(0, 0, 2, 2);
    EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
    EXPECT_DOUBLE_EQ(iou(a, Box::corner(5, 5, 7, 7)), 0.0);
    EXPECT_DOUBLE_EQ(iou(a, Box::corner(1, 0, 3, 2)), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(iou(Box::corner(1, 1, 1, 1), Box::corner(1, 1, 1, 1)), 0.0);
    EXPECT_DOUBLE_EQ(iou(a, Box::corner(1, 0, 3, 2)), iou(Box::corner(1, 0, 3, 2), a));
}

TEST(Iou, RangeOnRandomPairs) {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        Box a = random_dyadic_box(rng, 50.0);
        Box b = random_dyadic_box(rng, 50.0);
        const double v = iou(a, b);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        EXPECT_DOUBLE_EQ(v, iou(b, a));
    }
}

TEST(SuccessAuc, ThresholdSweep) {
    EXPECT_DOUBLE_EQ(success_auc(std::vector<double>(5, 1.0)), 20.0 / 21.0);
    EXPECT_DOUBLE_EQ(success_auc(std::vector<double>(5, 0.0)), 0.0);
    EXPECT_DOUBLE_EQ(success_auc(std::vector<double>(4, 0.5)), 10.0 / 21.0);
    EXPECT_THROW(success_auc({}), Error);
}

TEST(Precision, BoundaryInclusive) {
    std::vector<Center> gt = {{0.0, 0.0}, {10.0, 10.0}};
    EXPECT_DOUBLE_EQ(precision_score(gt, gt, 20.0), 1.0);
    std::vector<Center> at_threshold = {{20.0, 0.0}, {10.0, 30.0}};
    EXPECT_DOUBLE_EQ(precision_score(at_threshold, gt, 20.0), 1.0);
    std::vector<Center> half = {{0.0, 0.0}, {50.0, 10.0}};
    EXPECT_DOUBLE_EQ(precision_score(half, gt, 20.0), 0.5);
    std::vector<Center> one = {{0.0, 0.0}};
    EXPECT_THROW(precision_score(one, gt, 20.0), Error);
    EXPECT_THROW(precision_score({}, {}, 20.0), Error);
}

TEST(NormalizedPrecision, ThresholdSweep) {
    std::vector<Box> gt = {Box::center(10, 10, 4, 4), Box::center(30, 30, 8, 8)};
    EXPECT_DOUBLE_EQ(normalized_precision(gt, gt), 1.0);

    // unit normalized error everywhere -> no threshold in [0, 0.5] passes
    std::vector<Box> far = {Box::center(14, 10, 4, 4), Box::center(38, 30, 8, 8)};
    EXPECT_DOUBLE_EQ(normalized_precision(far, gt), 0.0);

    // error 0.25 everywhere -> thresholds 0.25..0.50 pass
    std::vector<Box> quarter = {Box::center(11, 10, 4, 4), Box::center(32, 30, 8, 8)};
    EXPECT_DOUBLE_EQ(normalized_precision(quarter, gt), 26.0 / 51.0);

    std::vector<Box> degen = {Box::corner(0, 0, 0, 4), Box::center(30, 30, 8, 8)};
    EXPECT_THROW(normalized_precision(gt, degen), Error);
}

TEST(Metrics, MatchNaiveRecomputation) {
    Rng rng(99);
    std::vector<Box> pred, gt;
    for (int i = 0; i < 1000; ++i) {
        gt.push_back(random_dyadic_box(rng, 80.0));
        if (rng.uniform() < 0.3) pred.push_back(gt.back());
        else pred.push_back(random_dyadic_box(rng, 80.0));
    }

    std::vector<double> ious;
    for (std::size_t i = 0; i < gt.size(); ++i) ious.push_back(iou(pred[i], gt[i]));

    double naive_auc = 0.0;
    for (int k = 0; k <= 20; ++k) {
        int pass = 0;
        for (double v : ious)
            if (v > k / 20.0) ++pass;
        naive_auc += pass / static_cast<double>(ious.size());
    }
    naive_auc /= 21.0;
    EXPECT_EQ(success_auc(ious), naive_auc);

    int close = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const double dx = pred[i].cx() - gt[i].cx();
        const double dy = pred[i].cy() - gt[i].cy();
        if (std::sqrt(dx * dx + dy * dy) <= 20.0) ++close;
    }
    EXPECT_EQ(precision_score(centers_of(pred), centers_of(gt), 20.0),
              close / static_cast<double>(gt.size()));

    double naive_np = 0.0;
    for (int k = 0; k <= 50; ++k) {
        int pass = 0;
        for (std::size_t i = 0; i < gt.size(); ++i) {
            const double ex = (pred[i].cx() - gt[i].cx()) / gt[i].w();
            const double ey = (pred[i].cy() - gt[i].cy()) / gt[i].h();
            if (std::sqrt(ex * ex + ey * ey) <= k / 100.0) ++pass;
        }
        naive_np += pass / static_cast<double>(gt.size());
    }
    naive_np /= 51.0;
    EXPECT_EQ(normalized_precision(pred, gt), naive_np);
}

TEST(Metrics, TranslationInvariance) {
    Rng rng(3);
    std::vector<Box> pred, gt, pred_s, gt_s;
    for (int i = 0; i < 100; ++i) {
        gt.push_back(random_dyadic_box(rng, 60.0));
        pred.push_back(random_dyadic_box(rng, 60.0));
        gt_s.push_back(shift(gt.back(), 16.0, -8.0));
        pred_s.push_back(shift(pred.back(), 16.0, -8.0));
    }
    std::vector<double> i1, i2;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        i1.push_back(iou(pred[i], gt[i]));
        i2.push_back(iou(pred_s[i], gt_s[i]));
    }
    EXPECT_EQ(success_auc(i1), success_auc(i2));
    EXPECT_EQ(precision_score(centers_of(pred), centers_of(gt)),
              precision_score(centers_of(pred_s), centers_of(gt_s)));
    EXPECT_EQ(normalized_precision(pred, gt), normalized_precision(pred_s, gt_s));
}

TEST(Evaluate, OverallIsMeanOfSequences) {
    EvalSequence s1{"a", {Box::corner(0, 0, 2, 2)}, {Box::corner(0, 0, 2, 2)}, {"fast-motion"}};
    EvalSequence s2{"b", {Box::corner(50, 50, 52, 52)}, {Box::corner(0, 0, 2, 2)}, {}};
    MetricsReport rep = evaluate_predictions({s1, s2}, 20.0);
    ASSERT_EQ(rep.per_sequence.size(), 2u);
    EXPECT_DOUBLE_EQ(rep.per_sequence[0].auc, 20.0 / 21.0);
    EXPECT_DOUBLE_EQ(rep.per_sequence[1].auc, 0.0);
    EXPECT_DOUBLE_EQ(rep.auc, (20.0 / 21.0 + 0.0) / 2.0);
    EXPECT_DOUBLE_EQ(rep.precision, (1.0 + 0.0) / 2.0);
    ASSERT_EQ(rep.per_attribute.count("fast-motion"), 1u);
    EXPECT_EQ(rep.per_attribute.at("fast-motion").count, 1);
    EXPECT_DOUBLE_EQ(rep.per_attribute.at("fast-motion").auc, 20.0 / 21.0);
}

TEST(Evaluate, LengthMismatchRejected) {
    EvalSequence bad{"a", {Box::corner(0, 0, 2, 2)}, {}, {}};
    EXPECT_THROW(evaluate_predictions({bad}, 20.0), Error);
    EXPECT_THROW(evaluate_predictions({}, 20.0), Error);
}

TEST(SuccessCurve, IdenticalBoxesStepFunction) {
    EvalSequence s{"a",
                   {Box::corner(0, 0, 2, 2), Box::corner(4, 4, 8, 8)},
                   {Box::corner(0, 0, 2, 2), Box::corner(4, 4, 8, 8)},
                   {}};
    std::vector<double> curve = success_curve({s});
    ASSERT_EQ(curve.size(), 21u);
    for (int i = 0; i < 20; ++i) EXPECT_DOUBLE_EQ(curve[static_cast<std::size_t>(i)], 1.0);
    EXPECT_DOUBLE_EQ(curve[20], 0.0);
    for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_LE(curve[i], curve[i - 1]);
}

TEST(QuantizationGeometry, IouImprovesWithBinCount) {
    Rng rng(31);
    const double s = 128.0;
    std::vector<Box> boxes;
    for (int i = 0; i < 1000; ++i) {
        const double w = rng.uniform(4.0, 40.0);
        const double h = rng.uniform(4.0, 40.0);
        const double x = rng.uniform(0.0, s - w);
        const double y = rng.uniform(0.0, s - h);
        boxes.push_back(Box::corner(x, y, x + w, y + h));
    }
    double prev = -1.0;
    for (int K : {10, 100, 1000}) {
        TokenVocab tv(K);
        double mean = 0.0;
        for (const Box& b : boxes) {
            auto toks = box_to_tokens(b, s, tv);
            Box back = tokens_to_box(toks, s, tv, BoxFormat::corner);
            mean += iou(b, back);
        }
        mean /= static_cast<double>(boxes.size());
        EXPECT_GT(mean, prev) << "K=" << K;
        prev = mean;
    }
    EXPECT_GT(prev, 0.9);
}
