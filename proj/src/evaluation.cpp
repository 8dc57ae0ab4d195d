#include "semsplat/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "semsplat/errors.hpp"

namespace semsplat {

std::uint64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

ConfusionMatrix confusion(const ImageU8& pred, const LabelImage& gt,
                          const ImageU8& mask, int num_classes) {
    if (pred.width != gt.width || pred.height != gt.height || pred.channels != 1) {
        throw DimensionError("confusion: prediction does not match ground truth shape");
    }
    const bool masked = !mask.data.empty();
    if (masked && (mask.width != gt.width || mask.height != gt.height || mask.channels != 1)) {
        throw DimensionError("confusion: mask does not match ground truth shape");
    }

    ConfusionMatrix cm(num_classes);
    for (std::size_t p = 0; p < gt.category_ids.size(); ++p) {
        const std::uint8_t truth = gt.category_ids[p];
        if (truth == kIgnoreLabel) continue;
        if (masked && mask.data[p] == 0) continue;
        const std::uint8_t prediction = pred.data[p];
        if (truth >= num_classes || prediction >= num_classes) {
            throw DimensionError("confusion: category id out of range");
        }
        ++cm.at(truth, prediction);
    }
    return cm;
}

ConfusionMatrix confusion(const ImageU8& pred, const LabelImage& gt, int num_classes) {
    return confusion(pred, gt, ImageU8{}, num_classes);
}

MetricsSummary miou_accuracy(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.total();
    if (total == 0) throw DimensionError("miou_accuracy: empty confusion matrix");

    MetricsSummary out;
    out.per_class_iou.resize(cm.num_classes);
    std::uint64_t trace = 0;
    double iou_sum = 0.0;
    int present = 0;
    for (int c = 0; c < cm.num_classes; ++c) {
        std::uint64_t tp = cm.at(c, c);
        std::uint64_t fp = 0, fn = 0;
        for (int k = 0; k < cm.num_classes; ++k) {
            if (k == c) continue;
            fp += cm.at(k, c);
            fn += cm.at(c, k);
        }
        trace += tp;
        const std::uint64_t denom = tp + fp + fn;
        if (denom == 0) continue;   // class absent from both gt and prediction
        const double iou = static_cast<double>(tp) / static_cast<double>(denom);
        out.per_class_iou[c] = iou;
        iou_sum += iou;
        ++present;
    }
    out.miou = present > 0 ? iou_sum / present : 0.0;
    out.accuracy = static_cast<double>(trace) / static_cast<double>(total);
    return out;
}

double psnr(const ImageF& rendered, const ImageF& reference) {
    if (!rendered.same_shape(reference) || rendered.data.empty()) {
        throw DimensionError("psnr: image shapes disagree or are empty");
    }
    double mse = 0.0;
    for (std::size_t i = 0; i < rendered.data.size(); ++i) {
        const double d = rendered.data[i] - reference.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(rendered.data.size());
    if (mse <= 0.0) return 99.0;
    return std::min(99.0, -10.0 * std::log10(mse));
}

namespace {

const char* ordering_name(SparsifyOrdering ordering) {
    switch (ordering) {
        case SparsifyOrdering::by_uncertainty: return "by_uncertainty";
        case SparsifyOrdering::oracle: return "oracle";
        case SparsifyOrdering::random: return "random";
    }
    return "unknown";
}

// Unit order for removal: index 0 is removed first. Stable under ties so the
// result is deterministic.
std::vector<std::size_t> removal_order(std::span<const double> removal_key,
                                       SparsifyOrdering ordering, std::uint64_t seed) {
    std::vector<std::size_t> order(removal_key.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (ordering == SparsifyOrdering::random) {
        std::mt19937_64 rng(seed);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng() % i]);
        }
    } else {
        std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
            return removal_key[l] > removal_key[r];
        });
    }
    return order;
}

} // namespace

SparsificationCurve sparsify_pixels(std::span<const double> uncertainty,
                                    std::span<const std::uint8_t> errors,
                                    int num_bins,
                                    SparsifyOrdering ordering,
                                    std::uint64_t seed) {
    if (uncertainty.size() != errors.size() || uncertainty.empty()) {
        throw DimensionError("sparsify_pixels: inputs empty or sizes disagree");
    }
    if (num_bins < 2) throw DimensionError("sparsify_pixels: num_bins must be >= 2");

    std::vector<double> key(uncertainty.begin(), uncertainty.end());
    if (ordering == SparsifyOrdering::oracle) {
        for (std::size_t i = 0; i < errors.size(); ++i) key[i] = errors[i] ? 1.0 : 0.0;
    }
    const std::vector<std::size_t> order = removal_order(key, ordering, seed);

    // Suffix error counts over the removal order.
    const std::size_t n = order.size();
    std::vector<std::uint64_t> suffix_errors(n + 1, 0);
    for (std::size_t i = n; i > 0; --i) {
        suffix_errors[i - 1] = suffix_errors[i] + (errors[order[i - 1]] ? 1 : 0);
    }

    SparsificationCurve curve;
    curve.ordering = ordering_name(ordering);
    const std::size_t bin_size = n / static_cast<std::size_t>(num_bins);
    for (int k = 0; k < num_bins; ++k) {
        const std::size_t removed = bin_size * static_cast<std::size_t>(k);
        const std::size_t remaining = n - removed;
        if (remaining == 0) break;
        curve.fractions_removed.push_back(static_cast<double>(k) / num_bins);
        curve.metric_values.push_back(
            1.0 - static_cast<double>(suffix_errors[removed]) / static_cast<double>(remaining));
    }
    return curve;
}

SparsificationCurve sparsify_images(std::span<const double> uncertainty,
                                    std::span<const double> psnr_values,
                                    int num_bins,
                                    SparsifyOrdering ordering,
                                    std::uint64_t seed) {
    if (uncertainty.size() != psnr_values.size() || uncertainty.empty()) {
        throw DimensionError("sparsify_images: inputs empty or sizes disagree");
    }
    if (num_bins < 2) throw DimensionError("sparsify_images: num_bins must be >= 2");

    std::vector<double> key(uncertainty.begin(), uncertainty.end());
    if (ordering == SparsifyOrdering::oracle) {
        // The worst images by actual quality go first.
        for (std::size_t i = 0; i < psnr_values.size(); ++i) key[i] = -psnr_values[i];
    }
    const std::vector<std::size_t> order = removal_order(key, ordering, seed);

    const std::size_t n = order.size();
    std::vector<double> suffix_psnr(n + 1, 0.0);
    for (std::size_t i = n; i > 0; --i) {
        suffix_psnr[i - 1] = suffix_psnr[i] + psnr_values[order[i - 1]];
    }

    SparsificationCurve curve;
    curve.ordering = ordering_name(ordering);
    const std::size_t bin_size = n / static_cast<std::size_t>(num_bins);
    for (int k = 0; k < num_bins; ++k) {
        const std::size_t removed = bin_size * static_cast<std::size_t>(k);
        const std::size_t remaining = n - removed;
        if (remaining == 0) break;
        curve.fractions_removed.push_back(static_cast<double>(k) / num_bins);
        curve.metric_values.push_back(suffix_psnr[removed] / static_cast<double>(remaining));
    }
    return curve;
}

double curve_auc(const SparsificationCurve& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.fractions_removed.size(); ++i) {
        const double df = curve.fractions_removed[i] - curve.fractions_removed[i - 1];
        area += 0.5 * (curve.metric_values[i] + curve.metric_values[i - 1]) * df;
    }
    return area;
}

} // namespace semsplat
