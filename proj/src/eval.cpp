#include "octroi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace octroi::eval {

std::size_t ScoreSet::positives() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

void ScoreSet::validate(bool require_both_classes) const {
    if (labels.size() != scores.size() || (!subject_ids.empty() && subject_ids.size() != scores.size()))
        throw ValidationError("score set sequences have different lengths");
    if (scores.size() < 2) throw ValidationError("score set needs at least 2 samples");
    for (int y : labels)
        if (y != 0 && y != 1) throw ValidationError("score set labels must be 0 or 1");
    for (double s : scores)
        if (!(s >= 0.0 && s <= 1.0)) throw ValidationError("score set scores must lie in [0, 1]");
    if (require_both_classes && (positives() == 0 || negatives() == 0))
        throw ValidationError("score set must contain both classes");
}

namespace {

/// 1-based midranks of values (ties share the average rank).
std::vector<double> midranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && values[order[j]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of i+1 .. j
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
        i = j;
    }
    return ranks;
}

}  // namespace

double auroc(const ScoreSet& set) {
    set.validate();
    const auto ranks = midranks(set.scores);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < ranks.size(); ++i)
        if (set.labels[i] == 1) rank_sum += ranks[i];
    const auto m = static_cast<double>(set.positives());
    const auto n = static_cast<double>(set.negatives());
    return (rank_sum - m * (m + 1.0) / 2.0) / (m * n);
}

Confusion confusion_metrics(const ScoreSet& set, double threshold) {
    set.validate(false);
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("threshold must lie in [0, 1]");
    Confusion c;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const bool predicted = set.scores[i] >= threshold;
        if (set.labels[i] == 1)
            (predicted ? c.tp : c.fn)++;
        else
            (predicted ? c.fp : c.tn)++;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    c.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(set.size());
    c.sensitivity = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : nan;
    c.specificity = c.tn + c.fp ? static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp) : nan;
    return c;
}

std::vector<RocPoint> roc_points(const ScoreSet& set) {
    set.validate();
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return set.scores[a] > set.scores[b]; });
    const auto m = static_cast<double>(set.positives());
    const auto n = static_cast<double>(set.negatives());

    std::vector<RocPoint> pts{{0.0, 0.0, std::numeric_limits<double>::infinity()}};
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double t = set.scores[order[i]];
        while (i < order.size() && set.scores[order[i]] == t) {
            (set.labels[order[i]] == 1 ? tp : fp)++;
            ++i;
        }
        pts.push_back({static_cast<double>(fp) / n, static_cast<double>(tp) / m, t});
    }
    return pts;
}

double trapezoid_area(const std::vector<RocPoint>& points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
    return area;
}

double youden_threshold(const ScoreSet& set) {
    const auto pts = roc_points(set);
    double best = -std::numeric_limits<double>::infinity();
    double threshold = pts.size() > 1 ? pts[1].threshold : 0.5;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double j = pts[i].tpr - pts[i].fpr;
        if (j > best) {
            best = j;
            threshold = pts[i].threshold;
        }
    }
    return threshold;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw ValidationError("quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ScoreSet stratified_resample(const ScoreSet& set, std::uint64_t seed, std::uint64_t index) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < set.size(); ++i) (set.labels[i] == 1 ? pos : neg).push_back(i);
    std::mt19937_64 rng(mix_seed(seed, index));
    ScoreSet out;
    out.scores.reserve(set.size());
    out.labels.reserve(set.size());
    const bool ids = !set.subject_ids.empty();
    for (const auto* group : {&pos, &neg}) {
        if (group->empty()) continue;
        std::uniform_int_distribution<std::size_t> pick(0, group->size() - 1);
        for (std::size_t k = 0; k < group->size(); ++k) {
            const std::size_t i = (*group)[pick(rng)];
            out.scores.push_back(set.scores[i]);
            out.labels.push_back(set.labels[i]);
            if (ids) out.subject_ids.push_back(set.subject_ids[i]);
        }
    }
    return out;
}

std::vector<Interval> bootstrap_cis(const ScoreSet& set, const std::vector<Metric>& metrics, int B, double alpha,
                                    std::uint64_t seed) {
    set.validate();
    if (B < 100) throw ValidationError("bootstrap needs B >= 100, got " + std::to_string(B));
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    std::vector<std::vector<double>> values(metrics.size(), std::vector<double>(static_cast<std::size_t>(B)));
    for (int b = 0; b < B; ++b) {
        const auto sample = stratified_resample(set, seed, static_cast<std::uint64_t>(b));
        for (std::size_t k = 0; k < metrics.size(); ++k) values[k][static_cast<std::size_t>(b)] = metrics[k](sample);
    }
    std::vector<Interval> out;
    for (auto& v : values) {
        std::sort(v.begin(), v.end());
        out.push_back({quantile_sorted(v, alpha / 2.0), quantile_sorted(v, 1.0 - alpha / 2.0)});
    }
    return out;
}

Interval bootstrap_ci(const ScoreSet& set, const Metric& metric, int B, double alpha, std::uint64_t seed) {
    return bootstrap_cis(set, {metric}, B, alpha, seed).front();
}

MetricsReport compute_metrics(const ScoreSet& set, double threshold, int B, double alpha, std::uint64_t seed) {
    set.validate();
    const std::vector<Metric> metrics{
        [](const ScoreSet& s) { return auroc(s); },
        [threshold](const ScoreSet& s) { return confusion_metrics(s, threshold).accuracy; },
        [threshold](const ScoreSet& s) { return confusion_metrics(s, threshold).sensitivity; },
        [threshold](const ScoreSet& s) { return confusion_metrics(s, threshold).specificity; },
    };
    const auto cis = bootstrap_cis(set, metrics, B, alpha, seed);
    std::vector<Estimate> est;
    for (std::size_t k = 0; k < metrics.size(); ++k) {
        const double point = metrics[k](set);
        est.push_back({point, std::min(cis[k].low, point), std::max(cis[k].high, point)});
    }
    MetricsReport r;
    r.auroc = est[0];
    r.accuracy = est[1];
    r.sensitivity = est[2];
    r.specificity = est[3];
    r.threshold = threshold;
    r.n_pos = set.positives();
    r.n_neg = set.negatives();
    return r;
}

StructuralComponents structural_components(const ScoreSet& set) {
    set.validate();
    std::vector<double> x, y;  // positive and negative scores
    for (std::size_t i = 0; i < set.size(); ++i) (set.labels[i] == 1 ? x : y).push_back(set.scores[i]);
    const auto m = static_cast<double>(x.size());
    const auto n = static_cast<double>(y.size());

    std::vector<double> z(x);
    z.insert(z.end(), y.begin(), y.end());
    const auto tz = midranks(z);
    const auto tx = midranks(x);
    const auto ty = midranks(y);

    StructuralComponents c;
    c.v10.resize(x.size());
    c.v01.resize(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) c.v10[i] = (tz[i] - tx[i]) / n;
    for (std::size_t j = 0; j < y.size(); ++j) c.v01[j] = 1.0 - (tz[x.size() + j] - ty[j]) / m;
    c.auc = std::accumulate(c.v10.begin(), c.v10.end(), 0.0) / m;
    return c;
}

namespace {

double sample_covariance(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t k = a.size();
    if (k < 2) return 0.0;
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(k);
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(k);
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += (a[i] - ma) * (b[i] - mb);
    return s / static_cast<double>(k - 1);
}

}  // namespace

double delong_covariance(const StructuralComponents& a, const StructuralComponents& b) {
    if (a.v10.size() != b.v10.size() || a.v01.size() != b.v01.size())
        throw ValidationError("delong_covariance: component vectors do not align");
    return sample_covariance(a.v10, b.v10) / static_cast<double>(a.v10.size()) +
           sample_covariance(a.v01, b.v01) / static_cast<double>(a.v01.size());
}

double delong_variance(const StructuralComponents& c) { return delong_covariance(c, c); }

std::string_view to_string(DelongMode mode) { return mode == DelongMode::Paired ? "paired" : "unpaired"; }

DelongMode parse_delong_mode(std::string_view text) {
    if (text == "paired") return DelongMode::Paired;
    if (text == "unpaired") return DelongMode::Unpaired;
    throw ValidationError("unknown DeLong mode '" + std::string(text) + "'");
}

ComparisonResult delong_test(const ScoreSet& a, const ScoreSet& b, DelongMode mode) {
    a.validate();
    b.validate();
    if (mode == DelongMode::Paired && (a.size() != b.size() || a.labels != b.labels))
        throw ValidationError("paired DeLong test needs identical labels over the same instances");

    const auto ca = structural_components(a);
    const auto cb = structural_components(b);
    double var = delong_variance(ca) + delong_variance(cb);
    if (mode == DelongMode::Paired) var -= 2.0 * delong_covariance(ca, cb);

    ComparisonResult r;
    r.mode = mode;
    r.auroc_a = ca.auc;
    r.auroc_b = cb.auc;
    const double delta = ca.auc - cb.auc;
    if (!(var > 0.0)) {
        if (delta == 0.0) {
            r.z = 0.0;
            r.p_value = 1.0;
            return r;
        }
        throw DegenerateComparisonError("DeLong comparison has zero variance but AUROC difference " +
                                        std::to_string(delta));
    }
    r.z = delta / std::sqrt(var);
    r.p_value = std::erfc(std::abs(r.z) / std::sqrt(2.0));
    return r;
}

}  // namespace octroi::eval
