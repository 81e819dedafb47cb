#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "octroi/core.hpp"

namespace octroi::eval {

/// Classifier outputs for one test set. Label 1 (AMD) is the positive class.
struct ScoreSet {
    std::vector<double> scores;
    std::vector<int> labels;
    std::vector<std::string> subject_ids;

    std::size_t size() const { return scores.size(); }
    std::size_t positives() const;
    std::size_t negatives() const { return size() - positives(); }
    /// Throws ValidationError on ragged sequences, n < 2, labels outside {0, 1},
    /// scores outside [0, 1], or (when require_both_classes) a missing class.
    void validate(bool require_both_classes = true) const;
};

/// Mann-Whitney AUROC via midranks; ties between classes count one half.
double auroc(const ScoreSet& set);

struct Confusion {
    std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
    double accuracy = 0.0;
    double sensitivity = 0.0;  ///< NaN when there are no positives
    double specificity = 0.0;  ///< NaN when there are no negatives
};

/// A sample is predicted positive iff score >= threshold.
Confusion confusion_metrics(const ScoreSet& set, double threshold);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;  ///< +inf for the leading (0, 0) point
};

/// One point per distinct score (descending thresholds), from (0,0) to (1,1).
std::vector<RocPoint> roc_points(const ScoreSet& set);
double trapezoid_area(const std::vector<RocPoint>& points);

/// Threshold maximizing sensitivity + specificity - 1; the highest such threshold on ties.
double youden_threshold(const ScoreSet& set);

struct Interval {
    double low = 0.0;
    double high = 0.0;
};

using Metric = std::function<double(const ScoreSet&)>;

/// Type-7 (linear interpolation) sample quantile of sorted values.
double quantile_sorted(const std::vector<double>& sorted, double q);

/// Stratified resample `index` of the bootstrap: positives then negatives, each
/// drawn with replacement from its own class, RNG = mt19937_64(mix_seed(seed, index)).
ScoreSet stratified_resample(const ScoreSet& set, std::uint64_t seed, std::uint64_t index);

/// Percentile interval [alpha/2, 1 - alpha/2] of the metric over B stratified resamples.
Interval bootstrap_ci(const ScoreSet& set, const Metric& metric, int B, double alpha, std::uint64_t seed);

/// Same resamples shared by every metric.
std::vector<Interval> bootstrap_cis(const ScoreSet& set, const std::vector<Metric>& metrics, int B, double alpha,
                                    std::uint64_t seed);

struct Estimate {
    double point = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct MetricsReport {
    Estimate auroc, accuracy, sensitivity, specificity;
    double threshold = 0.5;
    std::size_t n_pos = 0, n_neg = 0;
};

/// Point estimates plus bootstrap CIs; each interval is widened to contain its point.
MetricsReport compute_metrics(const ScoreSet& set, double threshold, int B, double alpha, std::uint64_t seed);

// ---- DeLong ------------------------------------------------------------------

/// Structural components of the AUROC: v10[i] per positive, v01[j] per negative.
struct StructuralComponents {
    double auc = 0.0;
    std::vector<double> v10;
    std::vector<double> v01;
};

/// Midrank formulation, O(n log n).
StructuralComponents structural_components(const ScoreSet& set);

/// S10/m + S01/n style covariance of two AUROC estimates on the same instances
/// (component vectors must align). covariance(c, c) is the variance.
double delong_covariance(const StructuralComponents& a, const StructuralComponents& b);
double delong_variance(const StructuralComponents& c);

enum class DelongMode { Paired, Unpaired };
std::string_view to_string(DelongMode mode);
DelongMode parse_delong_mode(std::string_view text);

struct ComparisonResult {
    double auroc_a = 0.0;
    double auroc_b = 0.0;
    double z = 0.0;
    double p_value = 1.0;
    DelongMode mode = DelongMode::Unpaired;
};

/// Zero variance with a nonzero AUROC difference.
class DegenerateComparisonError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two-sided DeLong test of AUROC(a) - AUROC(b).
ComparisonResult delong_test(const ScoreSet& a, const ScoreSet& b, DelongMode mode);

inline constexpr double kSignificanceLevel = 0.05;

}  // namespace octroi::eval
