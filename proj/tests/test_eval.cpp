#include <doctest.h>

#include <cmath>
#include <random>

#include "octroi/eval.hpp"
#include "oracles.hpp"

using namespace octroi;
using namespace octroi::eval;

namespace {

ScoreSet make_set(std::vector<double> scores, std::vector<int> labels) {
    ScoreSet s;
    s.scores = std::move(scores);
    s.labels = std::move(labels);
    return s;
}

// Scores on a coarse grid so ties are common.
ScoreSet random_set(std::mt19937_64& rng, int n_pos, int n_neg, int levels = 10) {
    std::uniform_int_distribution<int> level(0, levels);
    ScoreSet s;
    for (int i = 0; i < n_pos + n_neg; ++i) {
        const int label = i < n_pos ? 1 : 0;
        s.scores.push_back(std::min(1.0, (level(rng) + 2 * label) / double(levels + 2)));
        s.labels.push_back(label);
    }
    return s;
}

}  // namespace

TEST_CASE("AUROC anchors") {
    CHECK(auroc(make_set({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0})) == 1.0);
    CHECK(auroc(make_set({0.3, 0.3, 0.3, 0.3}, {1, 0, 1, 0})) == 0.5);
    CHECK(auroc(make_set({0.9, 0.4, 0.35, 0.8}, {1, 0, 1, 0})) == 0.5);
    CHECK_THROWS_AS(auroc(make_set({0.1, 0.2}, {1, 1})), ValidationError);
    CHECK_THROWS_AS(auroc(make_set({0.1, 1.2}, {1, 0})), ValidationError);
    CHECK_THROWS_AS(auroc(make_set({0.1, 0.2}, {1, 2})), ValidationError);
}

TEST_CASE("AUROC equals pair counting with ties") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 50; ++t) {
        const auto s = random_set(rng, 1 + t % 9, 1 + t % 7, 3 + t % 5);
        CHECK(auroc(s) == doctest::Approx(oracle::auroc(s.scores, s.labels)).epsilon(1e-12));
    }
}

TEST_CASE("confusion metrics") {
    auto c = confusion_metrics(make_set({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}), 0.5);
    CHECK(c.accuracy == 1.0);
    CHECK(c.sensitivity == 1.0);
    CHECK(c.specificity == 1.0);
    c = confusion_metrics(make_set({0, 0, 0, 0}, {1, 1, 0, 0}), 0.5);
    CHECK(c.sensitivity == 0.0);
    CHECK(c.specificity == 1.0);
    c = confusion_metrics(make_set({0.6, 0.4, 0.7, 0.2}, {1, 1, 0, 0}), 0.5);
    CHECK(c.tp == 1);
    CHECK(c.fn == 1);
    CHECK(c.fp == 1);
    CHECK(c.tn == 1);
    CHECK(c.accuracy == 0.5);
    CHECK(c.sensitivity == 0.5);
    CHECK(c.specificity == 0.5);
    // a score exactly at the threshold is positive
    CHECK(confusion_metrics(make_set({0.5, 0.1}, {1, 0}), 0.5).tp == 1);
}

TEST_CASE("ROC points and trapezoid area") {
    auto pts = roc_points(make_set({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}));
    bool corner = false;
    for (const auto& p : pts) corner |= p.fpr == 0.0 && p.tpr == 1.0;
    CHECK(corner);
    pts = roc_points(make_set({0.4, 0.4, 0.4}, {1, 0, 0}));
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].fpr == 0.0);
    CHECK(pts[1].tpr == 1.0);
    CHECK(trapezoid_area(pts) == 0.5);

    std::mt19937_64 rng(2);
    for (int t = 0; t < 20; ++t) {
        const auto s = random_set(rng, 25, 25, 6);
        CHECK(trapezoid_area(roc_points(s)) == doctest::Approx(auroc(s)).epsilon(1e-12));
    }
}

TEST_CASE("Youden threshold on separable data splits the classes") {
    const auto s = make_set({0.9, 0.7, 0.6, 0.3, 0.2}, {1, 1, 1, 0, 0});
    const double t = youden_threshold(s);
    const auto c = confusion_metrics(s, t);
    CHECK(c.sensitivity == 1.0);
    CHECK(c.specificity == 1.0);
}

TEST_CASE("type-7 quantile") {
    const std::vector<double> v{1, 2, 3, 4};
    CHECK(quantile_sorted(v, 0.0) == 1.0);
    CHECK(quantile_sorted(v, 1.0) == 4.0);
    CHECK(quantile_sorted(v, 0.5) == 2.5);
    CHECK(quantile_sorted(v, 0.25) == doctest::Approx(1.75));
}

TEST_CASE("stratified resampling preserves class counts") {
    std::mt19937_64 rng(3);
    const auto s = random_set(rng, 7, 13);
    for (std::uint64_t b = 0; b < 20; ++b) {
        const auto r = stratified_resample(s, 99, b);
        CHECK(r.positives() == 7);
        CHECK(r.negatives() == 13);
    }
    CHECK(stratified_resample(s, 99, 4).scores == stratified_resample(s, 99, 4).scores);
}

TEST_CASE("bootstrap matches the independent resampler") {
    std::mt19937_64 rng(4);
    const auto s = random_set(rng, 20, 20, 8);
    const Interval ci = bootstrap_ci(s, auroc, 1000, 0.05, 2024);
    CHECK(ci.low == doctest::Approx(oracle::bootstrap_quantile_auroc(s.scores, s.labels, 1000, 0.025, 2024)).epsilon(1e-12));
    CHECK(ci.high == doctest::Approx(oracle::bootstrap_quantile_auroc(s.scores, s.labels, 1000, 0.975, 2024)).epsilon(1e-12));
    CHECK(ci.low <= ci.high);

    const auto perfect = make_set({0.9, 0.8, 0.7, 0.1, 0.2, 0.3}, {1, 1, 1, 0, 0, 0});
    const auto p = bootstrap_ci(perfect, auroc, 200, 0.05, 1);
    CHECK(p.low == 1.0);
    CHECK(p.high == 1.0);

    CHECK_THROWS_AS(bootstrap_ci(s, auroc, 50, 0.05, 1), ValidationError);
    CHECK_THROWS_AS(bootstrap_ci(s, auroc, 200, 1.5, 1), ValidationError);
}

TEST_CASE("metrics report contains its point estimates") {
    std::mt19937_64 rng(5);
    const auto s = random_set(rng, 15, 25, 6);
    const auto m = compute_metrics(s, 0.5, 300, 0.05, 8);
    CHECK(m.n_pos == 15);
    CHECK(m.n_neg == 25);
    CHECK(m.auroc.point == auroc(s));
    for (const auto* e : {&m.auroc, &m.accuracy, &m.sensitivity, &m.specificity}) {
        CHECK(e->ci_low <= e->point);
        CHECK(e->point <= e->ci_high);
    }
    CHECK(compute_metrics(s, 0.5, 300, 0.05, 8).auroc.ci_low == m.auroc.ci_low);
}

TEST_CASE("fast DeLong components equal the naive computation") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 20; ++t) {
        auto a = random_set(rng, 30, 30, 12);
        auto b = random_set(rng, 30, 30, 12);
        b.labels = a.labels;
        const auto fa = structural_components(a), fb = structural_components(b);
        const auto na = oracle::components(a.scores, a.labels), nb = oracle::components(b.scores, b.labels);
        CHECK(delong_variance(fa) == doctest::Approx(oracle::delong_covariance(na, na)).epsilon(1e-10));
        CHECK(delong_covariance(fa, fb) == doctest::Approx(oracle::delong_covariance(na, nb)).epsilon(1e-10));
    }
}

TEST_CASE("DeLong test behaviour") {
    std::mt19937_64 rng(7);
    const auto a = random_set(rng, 30, 30);
    const auto same = delong_test(a, a, DelongMode::Paired);
    CHECK(same.z == 0.0);
    CHECK(same.p_value == 1.0);

    std::uniform_real_distribution<double> u(0.0, 1.0);
    ScoreSet sep, chance;
    for (int i = 0; i < 400; ++i) {
        const int label = i < 200;
        sep.scores.push_back(label ? 0.6 + 0.4 * u(rng) : 0.4 * u(rng));
        chance.scores.push_back(u(rng));
        sep.labels.push_back(label);
        chance.labels.push_back(label);
    }
    const auto r = delong_test(sep, chance, DelongMode::Unpaired);
    CHECK(r.auroc_a == 1.0);
    CHECK(r.p_value < 0.001);

    // zero variance on both sides but different AUROCs
    const auto one = make_set({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0});
    const auto zero = make_set({0.1, 0.2, 0.9, 0.8}, {1, 1, 0, 0});
    CHECK_THROWS_AS(delong_test(one, zero, DelongMode::Paired), DegenerateComparisonError);
    CHECK(delong_test(one, one, DelongMode::Unpaired).p_value == 1.0);

    CHECK_THROWS_AS(delong_test(one, make_set({0.1, 0.2, 0.3}, {1, 0, 0}), DelongMode::Paired), ValidationError);
    CHECK(parse_delong_mode("paired") == DelongMode::Paired);
    CHECK_THROWS_AS(parse_delong_mode("both"), ValidationError);
}
