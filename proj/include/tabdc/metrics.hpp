#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tabdc/matrix.hpp"

namespace tabdc::metrics {

// Probability that a random positive outranks a random negative, ties
// counted half (Mann-Whitney form, computed from average ranks).
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

struct ConfusionMetrics {
    double sensitivity = 0.0;
    double specificity = 0.0;
    std::optional<double> ppv;  // empty when no predicted positives
    std::optional<double> npv;  // empty when no predicted negatives
};

// Rates of the 2x2 table induced by predicting positive at score >= threshold.
ConfusionMetrics confusion_metrics(const std::vector<double>& scores,
                                   const std::vector<int>& labels, double threshold);

// Threshold maximizing sensitivity + specificity - 1 over the empirical ROC.
double youden_threshold(const std::vector<double>& scores, const std::vector<int>& labels);

// Harrell's concordance: over pairs where the earlier time is an event
// (ties in time count when the event precedes a censored row), the fraction
// with higher risk on the earlier event, ties in risk counted half.
double concordance_index(const std::vector<double>& risk_scores, const std::vector<double>& times,
                         const std::vector<int>& events);

struct KmCurve {
    std::vector<double> event_times;     // distinct times with >= 1 event, ascending
    std::vector<double> survival_probs;  // product-limit value just after each event time
    std::vector<std::size_t> at_risk_counts;

    // right-continuous step evaluation; 1.0 before the first event time
    double survival_at(double t) const;
};

KmCurve km_curve(const std::vector<double>& times, const std::vector<int>& events);

enum class Distance { euclidean, manhattan, cosine };

double row_distance(const double* a, const double* b, std::size_t d, Distance metric);

// Distance from each row of a to its nearest row of b. With exclude_self set
// (for a == b), entry i skips b's row i.
std::vector<double> nn_distance_distribution(const Matrix& a, const Matrix& b, Distance metric,
                                             bool exclude_self = false);

struct BootstrapCi {
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

// Percentile 2.5/97.5 bootstrap over resamples of (scores, labels) pairs.
// Stratified by label; resamples on which the metric throws are redrawn.
BootstrapCi bootstrap_ci(
    const std::function<double(const std::vector<double>&, const std::vector<int>&)>& metric,
    const std::vector<double>& scores, const std::vector<int>& labels, int n_resamples,
    std::uint64_t seed);

// Survival variant resampling (score, time, event) triples jointly.
BootstrapCi bootstrap_ci_survival(
    const std::function<double(const std::vector<double>&, const std::vector<double>&,
                               const std::vector<int>&)>& metric,
    const std::vector<double>& scores, const std::vector<double>& times,
    const std::vector<int>& events, int n_resamples, std::uint64_t seed);

}  // namespace tabdc::metrics
