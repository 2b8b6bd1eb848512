#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gdes {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
    std::size_t total() const { return tp + fp + tn + fn; }
};

struct EvalReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
    ConfusionCounts counts;
    double threshold = 0.0;
    bool precision_defined = true;
    bool recall_defined = true;
    bool f1_defined = true;
    bool auc_defined = true;
    std::uint64_t seed = 0;
    std::string config_hash;
};

/// Thresholded classification metrics; a pair is predicted positive when its
/// score is >= threshold. Ratios with a zero denominator are reported as 0
/// and flagged.
inline EvalReport confusion_metrics(std::span<const double> scores,
                                    std::span<const std::uint8_t> labels, double threshold) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("confusion_metrics: length mismatch");
    if (scores.empty()) throw std::invalid_argument("confusion_metrics: empty input");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("confusion_metrics: threshold must lie in (0,1)");

    EvalReport r;
    r.threshold = threshold;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        const bool truth = labels[i] != 0;
        if (pred && truth) ++r.counts.tp;
        else if (pred && !truth) ++r.counts.fp;
        else if (!pred && truth) ++r.counts.fn;
        else ++r.counts.tn;
    }
    r.accuracy = static_cast<double>(r.counts.tp + r.counts.tn) /
                 static_cast<double>(r.counts.total());
    const std::size_t pred_pos = r.counts.tp + r.counts.fp;
    const std::size_t actual_pos = r.counts.tp + r.counts.fn;
    r.precision_defined = pred_pos > 0;
    r.recall_defined = actual_pos > 0;
    r.precision = r.precision_defined
                      ? static_cast<double>(r.counts.tp) / static_cast<double>(pred_pos)
                      : 0.0;
    r.recall = r.recall_defined
                   ? static_cast<double>(r.counts.tp) / static_cast<double>(actual_pos)
                   : 0.0;
    r.f1_defined = (r.precision + r.recall) > 0.0;
    r.f1 = r.f1_defined ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    r.auc_defined = false;
    return r;
}

/// Probability that a uniformly random positive outranks a uniformly random
/// negative, ties counted one half (Mann-Whitney via midranks).
inline double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: length mismatch");
    std::size_t pos = 0;
    for (auto y : labels) pos += y != 0 ? 1 : 0;
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0)
        throw std::invalid_argument("roc_auc: need at least one positive and one negative");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        // 1-based midrank of the tie block [i, j].
        const double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] != 0) positive_rank_sum += midrank;
        i = j + 1;
    }
    const double p = static_cast<double>(pos);
    return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

/// Metrics plus AUC in one report.
inline EvalReport evaluate_scores(std::span<const double> scores,
                                  std::span<const std::uint8_t> labels, double threshold) {
    EvalReport r = confusion_metrics(scores, labels, threshold);
    std::size_t pos = 0;
    for (auto y : labels) pos += y != 0 ? 1 : 0;
    if (pos > 0 && pos < labels.size()) {
        r.auc = roc_auc(scores, labels);
        r.auc_defined = true;
    }
    return r;
}

}  // namespace gdes
