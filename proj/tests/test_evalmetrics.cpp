#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "gdes/evalmetrics.hpp"
#include "gdes/rng.hpp"

using namespace gdes;

namespace {

// Brute-force oracles, deliberately independent of the implementation path.
double auc_by_pair_counting(const std::vector<double>& scores,
                            const std::vector<std::uint8_t>& labels) {
    double wins = 0.0;
    std::size_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        ++pos;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    for (auto y : labels) neg += y ? 0 : 1;
    return wins / (double(pos) * double(neg));
}

ConfusionCounts counts_by_scan(const std::vector<double>& scores,
                               const std::vector<std::uint8_t>& labels, double thr) {
    ConfusionCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= thr;
        if (pred && labels[i]) ++c.tp;
        if (pred && !labels[i]) ++c.fp;
        if (!pred && labels[i]) ++c.fn;
        if (!pred && !labels[i]) ++c.tn;
    }
    return c;
}

}  // namespace

TEST_CASE("confusion metrics on hand examples") {
    {
        const std::vector<double> s{0.9, 0.1};
        const std::vector<std::uint8_t> y{1, 0};
        const EvalReport r = confusion_metrics(s, y, 0.4);
        REQUIRE(r.accuracy == 1.0);
        REQUIRE(r.f1 == 1.0);
    }
    {
        const std::vector<double> s{0.5, 0.5, 0.5};
        const std::vector<std::uint8_t> y{1, 1, 0};
        const EvalReport r = confusion_metrics(s, y, 0.4);
        REQUIRE_THAT(r.precision, Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-15));
        REQUIRE(r.recall == 1.0);
        REQUIRE_THAT(r.f1, Catch::Matchers::WithinAbs(0.8, 1e-15));
        REQUIRE(r.counts.tp == 2);
        REQUIRE(r.counts.fp == 1);
    }
    {
        // all predictions negative: precision undefined, reported 0 + flag
        const std::vector<double> s{0.1, 0.2};
        const std::vector<std::uint8_t> y{1, 0};
        const EvalReport r = confusion_metrics(s, y, 0.4);
        REQUIRE(r.precision == 0.0);
        REQUIRE_FALSE(r.precision_defined);
        REQUIRE(r.recall == 0.0);
        REQUIRE(r.recall_defined);
    }
    REQUIRE_THROWS(confusion_metrics(std::vector<double>{0.5}, std::vector<std::uint8_t>{1, 0},
                                     0.4));
}

TEST_CASE("roc auc on hand examples") {
    {
        // perfectly separated
        const std::vector<double> s{0.9, 0.8, 0.2, 0.1};
        const std::vector<std::uint8_t> y{1, 1, 0, 0};
        REQUIRE(roc_auc(s, y) == 1.0);
    }
    {
        const std::vector<double> s{0.9, 0.8, 0.4, 0.3};
        const std::vector<std::uint8_t> y{1, 0, 1, 0};
        REQUIRE_THAT(roc_auc(s, y), Catch::Matchers::WithinAbs(0.75, 1e-15));
    }
    {
        // all tied: exactly one half
        const std::vector<double> s{0.5, 0.5, 0.5, 0.5};
        const std::vector<std::uint8_t> y{1, 0, 1, 0};
        REQUIRE(roc_auc(s, y) == 0.5);
    }
    REQUIRE_THROWS(roc_auc(std::vector<double>{0.5, 0.6}, std::vector<std::uint8_t>{1, 1}));
}

TEST_CASE("roc auc equals brute-force pair counting, ties included") {
    Rng rng(606);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 2 + rng.below(60);
        std::vector<double> scores(n);
        std::vector<std::uint8_t> labels(n);
        // coarse score grid to force plenty of ties
        for (std::size_t i = 0; i < n; ++i) scores[i] = double(rng.below(8)) / 8.0;
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = rng.bernoulli(0.5) ? 1 : 0;
            (labels[i] ? has_pos : has_neg) = true;
        }
        if (!has_pos || !has_neg) continue;
        REQUIRE(roc_auc(scores, labels) == auc_by_pair_counting(scores, labels));
    }
}

TEST_CASE("confusion counts equal a brute-force scan") {
    Rng rng(707);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 1 + rng.below(50);
        std::vector<double> scores(n);
        std::vector<std::uint8_t> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = rng.uniform();
            labels[i] = rng.bernoulli(0.4) ? 1 : 0;
        }
        const double thr = rng.uniform(0.05, 0.95);
        const EvalReport r = confusion_metrics(scores, labels, thr);
        const ConfusionCounts c = counts_by_scan(scores, labels, thr);
        REQUIRE(r.counts.tp == c.tp);
        REQUIRE(r.counts.fp == c.fp);
        REQUIRE(r.counts.tn == c.tn);
        REQUIRE(r.counts.fn == c.fn);
        REQUIRE(r.counts.total() == n);
    }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
    Rng rng(808);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t n = 4 + rng.below(40);
        std::vector<double> scores(n);
        std::vector<std::uint8_t> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = double(rng.below(16)) / 4.0 - 2.0;
            labels[i] = i % 2;
        }
        const double base = roc_auc(scores, labels);

        // a few monotone maps with random positive coefficients
        const double a = rng.uniform(0.1, 4.0), b = rng.uniform(-3.0, 3.0);
        std::vector<double> affine(n), expo(n), cube(n);
        for (std::size_t i = 0; i < n; ++i) {
            affine[i] = a * scores[i] + b;
            expo[i] = std::exp(scores[i]);
            cube[i] = scores[i] * scores[i] * scores[i];
        }
        REQUIRE(roc_auc(affine, labels) == base);
        REQUIRE(roc_auc(expo, labels) == base);
        REQUIRE(roc_auc(cube, labels) == base);
    }
}

TEST_CASE("auc of negated scores complements when there are no ties") {
    Rng rng(909);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t n = 4 + rng.below(30);
        std::vector<double> scores(n);
        std::vector<std::uint8_t> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = rng.uniform();  // continuous draws, ties have measure zero
            labels[i] = i % 2;
        }
        std::vector<double> neg(n);
        for (std::size_t i = 0; i < n; ++i) neg[i] = -scores[i];
        REQUIRE_THAT(roc_auc(scores, labels) + roc_auc(neg, labels),
                     Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("evaluate_scores bundles auc with the confusion metrics") {
    const std::vector<double> s{0.9, 0.8, 0.4, 0.3};
    const std::vector<std::uint8_t> y{1, 0, 1, 0};
    const EvalReport r = evaluate_scores(s, y, 0.4);
    REQUIRE(r.auc_defined);
    REQUIRE_THAT(r.auc, Catch::Matchers::WithinAbs(0.75, 1e-15));
    REQUIRE(r.counts.tp == 2);

    const EvalReport single = evaluate_scores(std::vector<double>{0.5, 0.6},
                                              std::vector<std::uint8_t>{1, 1}, 0.4);
    REQUIRE_FALSE(single.auc_defined);
}
