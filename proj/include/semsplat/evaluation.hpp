#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semsplat/types.hpp"

namespace semsplat {

// Rows = ground truth, columns = prediction.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<std::uint64_t> counts;   // C x C row-major

    explicit ConfusionMatrix(int c = 0)
        : num_classes(c), counts(static_cast<std::size_t>(c) * c, 0) {}

    std::uint64_t at(int gt, int pred) const {
        return counts[static_cast<std::size_t>(gt) * num_classes + pred];
    }
    std::uint64_t& at(int gt, int pred) {
        return counts[static_cast<std::size_t>(gt) * num_classes + pred];
    }
    std::uint64_t total() const;
};

// Pixels where gt == kIgnoreLabel or mask == 0 are excluded. mask may be
// empty (no masking); otherwise it must match the label dimensions.
ConfusionMatrix confusion(const ImageU8& pred, const LabelImage& gt,
                          const ImageU8& mask, int num_classes);
ConfusionMatrix confusion(const ImageU8& pred, const LabelImage& gt,
                          int num_classes);

struct MetricsSummary {
    std::vector<std::optional<double>> per_class_iou;   // nullopt = absent class
    double miou = 0.0;
    double accuracy = 0.0;
};

// IoU_c = TP/(TP+FP+FN); classes absent from both gt and prediction are
// excluded from the mean. DimensionError on an empty matrix.
MetricsSummary miou_accuracy(const ConfusionMatrix& cm);

// 10*log10(1/MSE) over all channels, capped at 99 dB. Inputs in [0,1].
double psnr(const ImageF& rendered, const ImageF& reference);

enum class SparsifyOrdering {
    by_uncertainty,   // sort by the supplied uncertainty values
    oracle,           // sort by true error (pixels) / true PSNR (images)
    random,           // seeded shuffle baseline
};

struct SparsificationCurve {
    std::vector<double> fractions_removed;   // ascending, starts at 0
    std::vector<double> metric_values;       // accuracy or mean PSNR
    std::string ordering;
};

// Removes the most-uncertain pixels in equal-count bins (remainder in the
// last, least-uncertain bin) and tracks accuracy of the remainder.
// errors[i] != 0 marks a wrong prediction. num_bins >= 2.
SparsificationCurve sparsify_pixels(std::span<const double> uncertainty,
                                    std::span<const std::uint8_t> errors,
                                    int num_bins,
                                    SparsifyOrdering ordering,
                                    std::uint64_t seed = 0);

// Image-level variant: units are whole images, the metric is the mean PSNR
// of the remaining images, and the oracle removes lowest-PSNR images first.
SparsificationCurve sparsify_images(std::span<const double> uncertainty,
                                    std::span<const double> psnr_values,
                                    int num_bins,
                                    SparsifyOrdering ordering,
                                    std::uint64_t seed = 0);

// Trapezoidal area under the curve over fractions_removed.
double curve_auc(const SparsificationCurve& curve);

} // namespace semsplat
