#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "segpipe/metrics.hpp"
#include "segpipe/postprocess.hpp"

using namespace segpipe;
using doctest::Approx;
using testutil::TestRng;

TEST_CASE("metrics config validation") {
    MetricsConfig c;
    CHECK_NOTHROW(c.validate());
    SUBCASE("bad connectivity") { c.connectivity = 18; }
    SUBCASE("negative dilation radius") { c.dilation_radius = -1; }
    SUBCASE("percentile above 100") { c.percentile = 101.0; }
    SUBCASE("negative percentile") { c.percentile = -5.0; }
    SUBCASE("negative dice penalty") { c.penalty_dice = -0.1; }
    SUBCASE("non-finite hd95 penalty") { c.penalty_hd95 = std::numeric_limits<double>::infinity(); }
    CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("dice: conventions and random parity") {
    const Shape3 s{4, 4, 4};
    BinaryMask a(s), b(s);
    CHECK(dice(a, b) == 1.0); // both empty
    a.at(0, 0, 0) = 1;
    CHECK(dice(a, b) == 0.0); // disjoint
    b.at(0, 0, 0) = 1;
    CHECK(dice(a, b) == 1.0); // identical
    b.at(1, 1, 1) = 1;
    CHECK(dice(a, b) == Approx(2.0 / 3.0)); // |A|=1, |B|=2, inter=1

    TestRng rng(61);
    for (int trial = 0; trial < 10; ++trial) {
        const BinaryMask x = testutil::random_mask(rng, {6, 7, 5}, rng.uniform(0.0, 0.8));
        const BinaryMask y = testutil::random_mask(rng, {6, 7, 5}, rng.uniform(0.0, 0.8));
        CHECK(dice(x, y) == testutil::naive_dice(x, y));
        CHECK(dice(x, y) == dice(y, x));
    }

    CHECK_THROWS_AS(dice(a, BinaryMask({3, 3, 3})), ValidationError);
}

TEST_CASE("surface_voxels: interior removal and border exposure") {
    // Solid 3x3x3 block centered in 5^3: only the centre voxel is interior.
    BinaryMask m({5, 5, 5});
    for (int64_t i = 1; i <= 3; ++i)
        for (int64_t j = 1; j <= 3; ++j)
            for (int64_t k = 1; k <= 3; ++k) m.at(i, j, k) = 1;
    const BinaryMask surf = surface_voxels(m);
    CHECK(count_nonzero(surf) == 26);
    CHECK(surf.at(2, 2, 2) == 0);

    // A full volume: the outside counts as background, so the whole boundary
    // shell is surface.
    BinaryMask full({3, 3, 3}, 1);
    const BinaryMask fs = surface_voxels(full);
    CHECK(count_nonzero(fs) == 26);
    CHECK(fs.at(1, 1, 1) == 0);
}

TEST_CASE("surface_voxels agrees with the 6-neighbor definition on random masks") {
    TestRng rng(62);
    for (int trial = 0; trial < 10; ++trial) {
        const BinaryMask m = testutil::random_mask(rng, {7, 6, 8}, rng.uniform(0.1, 0.9));
        BinaryMask expect(m.shape);
        for (const auto& p : testutil::naive_surface_points(m)) expect.at(p[0], p[1], p[2]) = 1;
        CHECK(surface_voxels(m) == expect);
    }
}

TEST_CASE("squared_edt matches brute-force nearest-site search exactly") {
    TestRng rng(63);
    for (int trial = 0; trial < 8; ++trial) {
        const Shape3 s{6, 7, 5};
        const BinaryMask sites = testutil::random_mask(rng, s, rng.uniform(0.02, 0.3));
        if (count_nonzero(sites) == 0) continue;
        const Grid3<double> d = squared_edt(sites);
        for (int64_t i = 0; i < s.h; ++i)
            for (int64_t j = 0; j < s.w; ++j)
                for (int64_t k = 0; k < s.d; ++k) {
                    int64_t best = std::numeric_limits<int64_t>::max();
                    for (int64_t si = 0; si < s.h; ++si)
                        for (int64_t sj = 0; sj < s.w; ++sj)
                            for (int64_t sk = 0; sk < s.d; ++sk) {
                                if (!sites.at(si, sj, sk)) continue;
                                const int64_t q = (i - si) * (i - si) + (j - sj) * (j - sj) +
                                                  (k - sk) * (k - sk);
                                best = std::min(best, q);
                            }
                    CHECK(d.at(i, j, k) == static_cast<double>(best));
                }
    }
}

TEST_CASE("squared_edt with no sites reports far-away everywhere") {
    const Grid3<double> d = squared_edt(BinaryMask({3, 3, 3}));
    for (const double v : d.data) CHECK(v >= 1e14);
}

TEST_CASE("percentile_value: edges and random parity") {
    std::vector<double> one{42.0};
    CHECK(percentile_value(one, 95.0) == 42.0);
    std::vector<double> empty;
    CHECK(percentile_value(empty, 95.0) == 0.0);

    std::vector<double> v{3.0, 1.0, 2.0, 0.0};
    CHECK(percentile_value(v, 0.0) == 0.0);
    CHECK(percentile_value(v, 100.0) == 3.0);
    // rank = 0.5*3 = 1.5 -> midpoint of sorted[1], sorted[2]
    CHECK(percentile_value(v, 50.0) == 1.5);

    TestRng rng(64);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> vals(static_cast<size_t>(rng.uniform_int(1, 50)));
        for (double& x : vals) x = rng.uniform(0.0, 100.0);
        const double pct = rng.uniform(0.0, 100.0);
        std::vector<double> copy = vals;
        CHECK(percentile_value(copy, pct) == Approx(testutil::naive_percentile(vals, pct)).epsilon(1e-12));
    }
}

TEST_CASE("hd95: empty conventions and hand geometry") {
    const Shape3 s{1, 1, 6};
    BinaryMask a(s), b(s);
    CHECK(hd95(a, b) == 0.0); // both empty
    a.at(0, 0, 0) = 1;
    CHECK(hd95(a, b) == 374.0);        // default penalty
    CHECK(hd95(a, b, 95.0, 99.0) == 99.0); // custom penalty
    CHECK(hd95(b, a) == 374.0);        // symmetric

    b.at(0, 0, 5) = 1;
    CHECK(hd95(a, b) == 5.0); // two points, both pooled distances are 5

    // Asymmetric pair: pooled distances {0, 0, 3}; at 95% the rank is 1.9.
    BinaryMask c(Shape3{1, 1, 4}), d(Shape3{1, 1, 4});
    c.at(0, 0, 0) = 1;
    d.at(0, 0, 0) = 1;
    d.at(0, 0, 3) = 1;
    CHECK(hd95(c, d) == Approx(2.7));
    CHECK(hd95(c, d, 50.0) == 0.0);
    CHECK(hd95(c, d, 100.0) == 3.0); // plain Hausdorff

    CHECK_THROWS_AS(hd95(a, BinaryMask({2, 2, 2})), ValidationError);
}

TEST_CASE("hd95 agrees with the all-pairs oracle on random masks") {
    TestRng rng(65);
    for (int trial = 0; trial < 12; ++trial) {
        const Shape3 s{9, 8, 7};
        const BinaryMask a = testutil::random_mask(rng, s, rng.uniform(0.02, 0.4));
        const BinaryMask b = testutil::random_mask(rng, s, rng.uniform(0.02, 0.4));
        const double pct = trial % 3 == 0 ? 100.0 : 95.0;
        const double got = hd95(a, b, pct);
        const double expect = testutil::naive_hd95(a, b, pct);
        CHECK(got == Approx(expect).epsilon(1e-12));
        CHECK(hd95(b, a, pct) == got);
    }
}

TEST_CASE("lesion-wise: empty masks give the perfect-score convention") {
    const MetricsConfig cfg;
    const auto r = lesion_wise_metrics(BinaryMask({4, 4, 4}), BinaryMask({4, 4, 4}), cfg);
    CHECK(r.dice == 1.0);
    CHECK(r.hd95 == 0.0);
    CHECK(r.entries.empty());
    CHECK(r.n_gt == 0);
    CHECK(r.n_pred == 0);
    CHECK(r.n_fp == 0);
    CHECK(r.n_fn == 0);
}

TEST_CASE("lesion-wise: unmatched components score the penalties") {
    const MetricsConfig cfg;
    const Shape3 s{12, 12, 12};

    SUBCASE("false positive only") {
        BinaryMask pred(s), gt(s);
        pred.at(3, 3, 3) = 1;
        const auto r = lesion_wise_metrics(pred, gt, cfg);
        CHECK(r.n_pred == 1);
        CHECK(r.n_gt == 0);
        CHECK(r.n_fp == 1);
        CHECK(r.n_fn == 0);
        REQUIRE(r.entries.size() == 1);
        CHECK(r.entries[0].gt_id == 0);
        CHECK(r.entries[0].pred_ids == std::vector<int>{1});
        CHECK(r.entries[0].dice == 0.0);
        CHECK(r.entries[0].hd95 == 374.0);
        CHECK(r.dice == 0.0);
        CHECK(r.hd95 == 374.0);
    }
    SUBCASE("false negative only") {
        BinaryMask pred(s), gt(s);
        gt.at(3, 3, 3) = 1;
        const auto r = lesion_wise_metrics(pred, gt, cfg);
        CHECK(r.n_fn == 1);
        CHECK(r.n_fp == 0);
        REQUIRE(r.entries.size() == 1);
        CHECK(r.entries[0].gt_id == 1);
        CHECK(r.entries[0].pred_ids.empty());
        CHECK(r.hd95 == 374.0);
    }
    SUBCASE("custom penalties are honored") {
        BinaryMask pred(s), gt(s);
        pred.at(3, 3, 3) = 1;
        MetricsConfig c2;
        c2.penalty_dice = 0.25;
        c2.penalty_hd95 = 10.0;
        const auto r = lesion_wise_metrics(pred, gt, c2);
        CHECK(r.dice == 0.25);
        CHECK(r.hd95 == 10.0);
    }
}

TEST_CASE("lesion-wise: the matching window is a Chebyshev ball of the dilation radius") {
    const MetricsConfig cfg; // radius 3
    const Shape3 s{12, 12, 12};
    BinaryMask gt(s);
    gt.at(5, 5, 5) = 1;

    SUBCASE("pred at Chebyshev distance 3 attaches") {
        BinaryMask pred(s);
        pred.at(5, 8, 8) = 1; // max(|0|,|3|,|3|) = 3
        const auto r = lesion_wise_metrics(pred, gt, cfg);
        REQUIRE(r.entries.size() == 1);
        CHECK(r.entries[0].gt_id == 1);
        CHECK(r.entries[0].pred_ids == std::vector<int>{1});
        CHECK(r.n_fp == 0);
        CHECK(r.n_fn == 0);
        CHECK(r.entries[0].dice == 0.0); // attached but not overlapping
    }
    SUBCASE("pred at Chebyshev distance 4 does not attach") {
        BinaryMask pred(s);
        pred.at(5, 5, 9) = 1;
        const auto r = lesion_wise_metrics(pred, gt, cfg);
        CHECK(r.entries.size() == 2); // one FN, one FP
        CHECK(r.n_fn == 1);
        CHECK(r.n_fp == 1);
        CHECK(r.dice == 0.0);
        CHECK(r.hd95 == 374.0);
    }
    SUBCASE("radius zero requires voxel overlap of the boxes") {
        BinaryMask pred(s);
        pred.at(5, 5, 6) = 1; // adjacent, not overlapping
        MetricsConfig c0;
        c0.dilation_radius = 0;
        const auto r = lesion_wise_metrics(pred, gt, c0);
        CHECK(r.n_fn == 1);
        CHECK(r.n_fp == 1);
    }
}

TEST_CASE("lesion-wise: one prediction may serve several references") {
    const MetricsConfig cfg;
    const Shape3 s{6, 6, 16};
    BinaryMask gt(s), pred(s);
    gt.at(2, 2, 2) = 1;
    gt.at(2, 2, 12) = 1;
    for (int64_t k = 5; k <= 9; ++k) pred.at(2, 2, k) = 1; // within 3 of both

    const auto r = lesion_wise_metrics(pred, gt, cfg);
    CHECK(r.n_gt == 2);
    CHECK(r.n_pred == 1);
    CHECK(r.n_fp == 0);
    CHECK(r.n_fn == 0);
    REQUIRE(r.entries.size() == 2);
    CHECK(r.entries[0].gt_id == 1);
    CHECK(r.entries[1].gt_id == 2);
    CHECK(r.entries[0].pred_ids == std::vector<int>{1});
    CHECK(r.entries[1].pred_ids == std::vector<int>{1});
}

TEST_CASE("lesion-wise: a reference scores the union of its attached predictions") {
    const MetricsConfig cfg;
    const Shape3 s{8, 8, 12};
    BinaryMask gt(s), pred(s);
    for (int64_t k = 2; k <= 4; ++k) gt.at(4, 4, k) = 1;
    pred.at(4, 4, 2) = 1; // overlaps
    pred.at(4, 4, 6) = 1; // Chebyshev distance 2 from (4,4,4): attaches too

    const auto r = lesion_wise_metrics(pred, gt, cfg);
    REQUIRE(r.entries.size() == 1);
    CHECK(r.entries[0].pred_ids == std::vector<int>{1, 2});
    // union {k=2, k=6} vs gt {2,3,4}: dice = 2*1 / (2+3)
    CHECK(r.entries[0].dice == Approx(0.4));
    CHECK(r.n_fp == 0);
}

TEST_CASE("lesion-wise matches the reference implementation on random masks") {
    TestRng rng(66);
    const MetricsConfig base;
    for (int trial = 0; trial < 10; ++trial) {
        const Shape3 s{12, 11, 13};
        const BinaryMask pred = testutil::random_mask(rng, s, rng.uniform(0.01, 0.08));
        const BinaryMask gt = testutil::random_mask(rng, s, rng.uniform(0.01, 0.08));
        MetricsConfig cfg = base;
        cfg.connectivity = trial % 2 == 0 ? 26 : 6;
        cfg.dilation_radius = trial % 3 == 0 ? 1 : 3;
        const auto got = lesion_wise_metrics(pred, gt, cfg);
        const auto expect =
            testutil::naive_lesion_wise(pred, gt, cfg.connectivity, cfg.dilation_radius,
                                        cfg.percentile, cfg.penalty_dice, cfg.penalty_hd95);
        CHECK(static_cast<int>(got.entries.size()) == expect.n_entries);
        CHECK(got.n_fn == expect.n_fn);
        CHECK(got.n_fp == expect.n_fp);
        CHECK(got.dice == Approx(expect.dice).epsilon(1e-12));
        CHECK(got.hd95 == Approx(expect.hd95).epsilon(1e-12));
    }
}

TEST_CASE("evaluate_case decodes labels and scores every channel") {
    const MetricsConfig cfg;
    const Shape3 s{14, 14, 14};
    LabelMap gt(s), pred(s);
    // gt: an ET core inside an NCR shell inside edema
    for (int64_t i = 3; i <= 9; ++i)
        for (int64_t j = 3; j <= 9; ++j)
            for (int64_t k = 3; k <= 9; ++k) gt.at(i, j, k) = kLabelEd;
    for (int64_t i = 4; i <= 8; ++i)
        for (int64_t j = 4; j <= 8; ++j)
            for (int64_t k = 4; k <= 8; ++k) gt.at(i, j, k) = kLabelNcr;
    for (int64_t i = 5; i <= 7; ++i)
        for (int64_t j = 5; j <= 7; ++j)
            for (int64_t k = 5; k <= 7; ++k) gt.at(i, j, k) = kLabelEt;
    // pred: same structure shifted by one voxel
    for (int64_t i = 4; i <= 10; ++i)
        for (int64_t j = 3; j <= 9; ++j)
            for (int64_t k = 3; k <= 9; ++k) pred.at(i, j, k) = kLabelEd;
    for (int64_t i = 5; i <= 9; ++i)
        for (int64_t j = 4; j <= 8; ++j)
            for (int64_t k = 4; k <= 8; ++k) pred.at(i, j, k) = kLabelNcr;
    for (int64_t i = 6; i <= 8; ++i)
        for (int64_t j = 5; j <= 7; ++j)
            for (int64_t k = 5; k <= 7; ++k) pred.at(i, j, k) = kLabelEt;

    const CaseReport rep = evaluate_case(pred, gt, cfg);
    const auto pc = labelmap_to_channels(pred);
    const auto gc = labelmap_to_channels(gt);
    double md = 0.0, mh = 0.0, ld = 0.0, lh = 0.0;
    for (int c = 0; c < 3; ++c) {
        const ChannelReport& ch = rep.channels[static_cast<size_t>(c)];
        CHECK(ch.legacy_dice == dice(pc[static_cast<size_t>(c)], gc[static_cast<size_t>(c)]));
        CHECK(ch.legacy_hd95 == hd95(pc[static_cast<size_t>(c)], gc[static_cast<size_t>(c)]));
        const auto lw = lesion_wise_metrics(pc[static_cast<size_t>(c)], gc[static_cast<size_t>(c)], cfg);
        CHECK(ch.lesion.dice == lw.dice);
        CHECK(ch.lesion.hd95 == lw.hd95);
        CHECK(ch.lesion.entries.size() == lw.entries.size());
        md += ch.legacy_dice / 3.0;
        mh += ch.legacy_hd95 / 3.0;
        ld += ch.lesion.dice / 3.0;
        lh += ch.lesion.hd95 / 3.0;
    }
    CHECK(rep.mean_legacy_dice == md);
    CHECK(rep.mean_legacy_hd95 == mh);
    CHECK(rep.mean_lesion_dice == ld);
    CHECK(rep.mean_lesion_hd95 == lh);
    // the one-voxel shift keeps every channel overlapping well
    CHECK(rep.mean_legacy_dice > 0.6);
}

TEST_CASE("evaluate_case validates its inputs") {
    const MetricsConfig cfg;
    LabelMap good({3, 3, 3});
    LabelMap other({2, 2, 2});
    CHECK_THROWS_AS(evaluate_case(good, other, cfg), ValidationError);
    LabelMap bad({3, 3, 3});
    bad.at(0, 0, 0) = 4;
    CHECK_THROWS_AS(evaluate_case(bad, good, cfg), ValidationError);
    CHECK_THROWS_AS(evaluate_case(good, bad, cfg), ValidationError);
}

TEST_CASE("aggregate_reports averages per channel and overall") {
    CaseReport a, b;
    a.case_id = "a";
    b.case_id = "b";
    for (int c = 0; c < 3; ++c) {
        a.channels[static_cast<size_t>(c)].legacy_dice = 0.1 * (c + 1);
        b.channels[static_cast<size_t>(c)].legacy_dice = 0.2 * (c + 1);
        a.channels[static_cast<size_t>(c)].lesion.hd95 = 10.0 * (c + 1);
        b.channels[static_cast<size_t>(c)].lesion.hd95 = 20.0 * (c + 1);
    }
    a.mean_legacy_dice = 0.2;
    b.mean_legacy_dice = 0.4;

    const CorpusReport corpus = aggregate_reports({a, b});
    REQUIRE(corpus.cases.size() == 2);
    CHECK(corpus.cases[0].case_id == "a");
    for (int c = 0; c < 3; ++c) {
        CHECK(corpus.channel_means[static_cast<size_t>(c)].legacy_dice ==
              Approx(0.15 * (c + 1)).epsilon(1e-12));
        CHECK(corpus.channel_means[static_cast<size_t>(c)].lesion_hd95 ==
              Approx(15.0 * (c + 1)).epsilon(1e-12));
    }
    CHECK(corpus.overall.legacy_dice == Approx(0.3).epsilon(1e-12));

    const CorpusReport empty = aggregate_reports({});
    CHECK(empty.cases.empty());
    CHECK(empty.overall.legacy_dice == 0.0);
}
