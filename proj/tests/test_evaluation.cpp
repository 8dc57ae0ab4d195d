#include <doctest.h>

#include <cmath>
#include <random>

#include "semsplat/evaluation.hpp"
#include "test_util.hpp"

using namespace semsplat;

namespace {

LabelImage labels_from(std::initializer_list<std::uint8_t> values, int w, int h) {
    LabelImage img;
    img.width = w;
    img.height = h;
    img.category_ids.assign(values);
    return img;
}

ImageU8 pred_from(std::initializer_list<std::uint8_t> values, int w, int h) {
    ImageU8 img(w, h, 1);
    img.data.assign(values);
    return img;
}

} // namespace

TEST_CASE("confusion") {
    SUBCASE("perfect prediction is diagonal") {
        const auto gt = labels_from({0, 1, 1, 0}, 2, 2);
        const auto pred = pred_from({0, 1, 1, 0}, 2, 2);
        const ConfusionMatrix cm = confusion(pred, gt, 2);
        CHECK(cm.at(0, 0) == 2);
        CHECK(cm.at(1, 1) == 2);
        CHECK(cm.at(0, 1) == 0);
        CHECK(cm.at(1, 0) == 0);
        CHECK(cm.total() == 4);
    }
    SUBCASE("fully masked input is the zero matrix") {
        const auto gt = labels_from({0, 1, 1, 0}, 2, 2);
        const auto pred = pred_from({0, 1, 1, 0}, 2, 2);
        ImageU8 mask(2, 2, 1, 0);
        const ConfusionMatrix cm = confusion(pred, gt, mask, 2);
        CHECK(cm.total() == 0);
    }
    SUBCASE("3x3 hand-enumerated fixture with ignores and a mask") {
        // gt:   0 0 1     pred: 0 1 1     mask: 1 1 1
        //       1 X 1           1 0 1           1 1 0
        //       0 1 0           1 1 0           1 1 1   (X = ignore)
        const auto gt = labels_from({0, 0, 1, 1, kIgnoreLabel, 1, 0, 1, 0}, 3, 3);
        const auto pred = pred_from({0, 1, 1, 1, 0, 1, 1, 1, 0}, 3, 3);
        ImageU8 mask(3, 3, 1, 1);
        mask.at(2, 1) = 0;
        const ConfusionMatrix cm = confusion(pred, gt, mask, 2);
        // Evaluated pixels: (0,0)->(0,0), (1,0)->(0,1), (2,0)->(1,1),
        // (0,1)->(1,1), (0,2)->(0,1), (1,2)->(1,1), (2,2)->(0,0).
        CHECK(cm.at(0, 0) == 2);
        CHECK(cm.at(0, 1) == 2);
        CHECK(cm.at(1, 0) == 0);
        CHECK(cm.at(1, 1) == 3);
        CHECK(cm.total() == 7);
    }
    SUBCASE("shape mismatch throws") {
        const auto gt = labels_from({0, 1, 1, 0}, 2, 2);
        const auto pred = pred_from({0, 1}, 2, 1);
        CHECK_THROWS_AS(confusion(pred, gt, 2), DimensionError);
    }
}

TEST_CASE("miou_accuracy") {
    SUBCASE("diagonal matrix is perfect") {
        ConfusionMatrix cm(3);
        cm.at(0, 0) = 5;
        cm.at(1, 1) = 2;
        cm.at(2, 2) = 7;
        const MetricsSummary m = miou_accuracy(cm);
        CHECK(m.miou == 1.0);
        CHECK(m.accuracy == 1.0);
    }
    SUBCASE("all-ones 2x2 matrix") {
        ConfusionMatrix cm(2);
        cm.at(0, 0) = cm.at(0, 1) = cm.at(1, 0) = cm.at(1, 1) = 1;
        const MetricsSummary m = miou_accuracy(cm);
        CHECK(*m.per_class_iou[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(*m.per_class_iou[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(m.miou == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(m.accuracy == 0.5);
    }
    SUBCASE("classes absent from gt and prediction are excluded from the mean") {
        ConfusionMatrix cm(3);
        cm.at(0, 0) = 4;
        cm.at(1, 0) = 4;   // class 2 never appears
        const MetricsSummary m = miou_accuracy(cm);
        CHECK(!m.per_class_iou[2].has_value());
        CHECK(m.per_class_iou[0].has_value());
        CHECK(m.miou == doctest::Approx(0.5 * (4.0 / 8.0 + 0.0)).epsilon(1e-12));
    }
    SUBCASE("empty matrix throws") {
        ConfusionMatrix cm(2);
        CHECK_THROWS_AS(miou_accuracy(cm), DimensionError);
    }
}

TEST_CASE("psnr") {
    SUBCASE("identical images cap at 99 dB") {
        ImageF img(4, 4, 3, 0.25);
        CHECK(psnr(img, img) == 99.0);
    }
    SUBCASE("constant 0.1 difference gives exactly 20 dB") {
        ImageF a(4, 4, 3, 0.5);
        ImageF b(4, 4, 3, 0.6);
        CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
    }
    SUBCASE("black versus white is 0 dB") {
        ImageF black(2, 2, 3, 0.0);
        ImageF white(2, 2, 3, 1.0);
        CHECK(psnr(black, white) == doctest::Approx(0.0));
    }
    SUBCASE("symmetric and channel-permutation invariant") {
        std::mt19937_64 rng(1);
        ImageF a(5, 4, 3), b(5, 4, 3);
        for (auto& v : a.data) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        for (auto& v : b.data) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        CHECK(psnr(a, b) == psnr(b, a));

        ImageF pa(5, 4, 3), pb(5, 4, 3);
        for (int y = 0; y < 4; ++y) {
            for (int x = 0; x < 5; ++x) {
                for (int c = 0; c < 3; ++c) {
                    pa.at(x, y, c) = a.at(x, y, (c + 1) % 3);
                    pb.at(x, y, c) = b.at(x, y, (c + 1) % 3);
                }
            }
        }
        CHECK(psnr(pa, pb) == doctest::Approx(psnr(a, b)).epsilon(1e-12));
    }
    SUBCASE("shape mismatch throws") {
        ImageF a(2, 2, 3), b(2, 3, 3);
        CHECK_THROWS_AS(psnr(a, b), DimensionError);
    }
}

TEST_CASE("sparsify_pixels") {
    SUBCASE("two pixels, two bins") {
        const double uncertainty[] = {0.9, 0.1};
        const std::uint8_t errors[] = {1, 0};
        const SparsificationCurve curve =
            sparsify_pixels(uncertainty, errors, 2, SparsifyOrdering::by_uncertainty);
        REQUIRE(curve.fractions_removed.size() == 2);
        CHECK(curve.fractions_removed[0] == 0.0);
        CHECK(curve.fractions_removed[1] == 0.5);
        CHECK(curve.metric_values[0] == 0.5);
        CHECK(curve.metric_values[1] == 1.0);
    }
    SUBCASE("constant uncertainty keeps the original pixel order") {
        const std::vector<double> uncertainty(10, 0.5);
        std::vector<std::uint8_t> errors(10, 0);
        errors[9] = 1;   // the last pixel is wrong and gets removed last
        const SparsificationCurve curve =
            sparsify_pixels(uncertainty, errors, 5, SparsifyOrdering::by_uncertainty);
        CHECK(curve.metric_values.front() == 0.9);
        CHECK(curve.metric_values.back() == doctest::Approx(1.0 - 1.0 / 2.0));
    }
    SUBCASE("oracle curve is monotone non-decreasing") {
        std::mt19937_64 rng(2);
        std::vector<double> uncertainty(256);
        std::vector<std::uint8_t> errors(256);
        for (std::size_t i = 0; i < uncertainty.size(); ++i) {
            uncertainty[i] = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            errors[i] = (rng() % 4) == 0;
        }
        const SparsificationCurve curve =
            sparsify_pixels(uncertainty, errors, 20, SparsifyOrdering::oracle);
        for (std::size_t i = 1; i < curve.metric_values.size(); ++i) {
            CHECK(curve.metric_values[i] >= curve.metric_values[i - 1]);
        }
    }
    SUBCASE("fractions ascend from zero and curves share them") {
        std::vector<double> uncertainty(100, 0.0);
        std::vector<std::uint8_t> errors(100, 0);
        const SparsificationCurve curve =
            sparsify_pixels(uncertainty, errors, 20, SparsifyOrdering::random, 7);
        CHECK(curve.fractions_removed.front() == 0.0);
        for (std::size_t i = 1; i < curve.fractions_removed.size(); ++i) {
            CHECK(curve.fractions_removed[i] > curve.fractions_removed[i - 1]);
        }
    }
    SUBCASE("bad inputs throw") {
        const double uncertainty[] = {0.5};
        const std::uint8_t errors[] = {0};
        CHECK_THROWS_AS(sparsify_pixels(uncertainty, errors, 1,
                                        SparsifyOrdering::by_uncertainty),
                        DimensionError);
        CHECK_THROWS_AS(sparsify_pixels({}, {}, 4, SparsifyOrdering::by_uncertainty),
                        DimensionError);
    }
}

TEST_CASE("sparsify_pixels: calibrated uncertainty dominates random, oracle dominates all") {
    // Bernoulli errors whose success probability IS the uncertainty signal.
    int wins_vs_random = 0;
    int bounded_by_oracle = 0;
    const int kSeeds = 5;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
        const std::size_t n = 4000;
        std::vector<double> uncertainty(n);
        std::vector<std::uint8_t> errors(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double p = uniform() * 0.6;
            uncertainty[i] = p;
            errors[i] = uniform() < p;
        }
        const auto by_u =
            sparsify_pixels(uncertainty, errors, 20, SparsifyOrdering::by_uncertainty);
        const auto oracle = sparsify_pixels(uncertainty, errors, 20, SparsifyOrdering::oracle);
        const auto random =
            sparsify_pixels(uncertainty, errors, 20, SparsifyOrdering::random, seed);

        if (curve_auc(by_u) > curve_auc(random)) ++wins_vs_random;
        bool below = true;
        for (std::size_t i = 0; i < by_u.metric_values.size(); ++i) {
            if (by_u.metric_values[i] > oracle.metric_values[i] + 1e-12) below = false;
        }
        if (below) ++bounded_by_oracle;
    }
    CHECK(wins_vs_random >= 4);
    CHECK(bounded_by_oracle == kSeeds);
}

TEST_CASE("sparsify_images") {
    SUBCASE("uncertainty ordering equal to inverse PSNR matches the oracle") {
        const double uncertainty[] = {0.9, 0.5, 0.1, 0.7};
        const double psnr_values[] = {10.0, 20.0, 30.0, 15.0};
        const auto by_u =
            sparsify_images(uncertainty, psnr_values, 4, SparsifyOrdering::by_uncertainty);
        const auto oracle = sparsify_images(uncertainty, psnr_values, 4,
                                            SparsifyOrdering::oracle);
        CHECK(by_u.metric_values == oracle.metric_values);
        // Mean PSNR rises as the worst images leave.
        CHECK(by_u.metric_values.front() == doctest::Approx(18.75));
        CHECK(by_u.metric_values.back() == 30.0);
    }
    SUBCASE("bins beyond the unit count degenerate to single removals") {
        const double uncertainty[] = {0.9, 0.1};
        const double psnr_values[] = {10.0, 30.0};
        const auto curve =
            sparsify_images(uncertainty, psnr_values, 2, SparsifyOrdering::by_uncertainty);
        CHECK(curve.metric_values[0] == 20.0);
        CHECK(curve.metric_values[1] == 30.0);
    }
}

TEST_CASE("curve_auc trapezoid") {
    SparsificationCurve curve;
    curve.fractions_removed = {0.0, 0.5, 1.0};
    curve.metric_values = {0.0, 1.0, 1.0};
    CHECK(curve_auc(curve) == doctest::Approx(0.25 + 0.5).epsilon(1e-12));
}
