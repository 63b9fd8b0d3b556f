#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "tabdc/matrix.hpp"

namespace tabdc::data {

// Binary-labelled tabular data in standardized units.
struct Dataset {
    Matrix features;                         // n x d
    std::vector<int> labels;                 // {0,1}, length n
    std::vector<std::string> feature_names;  // length d

    std::size_t n() const { return features.rows(); }
    std::size_t d() const { return features.cols(); }
};

// Right-censored time-to-event data. times are strictly positive (scaled or
// raw units); events flag observed (1) vs censored (0) rows.
struct SurvivalDataset {
    Matrix features;
    std::vector<double> times;
    std::vector<int> events;
    std::vector<std::string> feature_names;

    std::size_t n() const { return features.rows(); }
    std::size_t d() const { return features.cols(); }
    std::size_t n_events() const;
};

using AnyDataset = std::variant<Dataset, SurvivalDataset>;

void validate(const Dataset& ds);
void validate(const SurvivalDataset& ds);

// Uniform divisor applied to all durations. scale_s is the IQR of the
// uncensored durations, falling back to their median when the IQR is zero.
struct TimeScaler {
    double scale_s = 1.0;

    double transform(double t) const { return t / scale_s; }
    double inverse(double t) const { return t * scale_s; }
};

// Linear-interpolation quantile (the "type 7" rule): q in [0,1] on a copy of
// the input. Shared by the time scaler and its tests' hand oracles.
double quantile_type7(std::vector<double> values, double q);

// Scales all durations by the robust divisor derived from event-only rows.
// Returns the scaled durations and the fitted scaler.
std::pair<std::vector<double>, TimeScaler> scale_survival_times(const std::vector<double>& times,
                                                                const std::vector<int>& events);

// Per-column standardization fit on training data. Stds of constant columns
// are floored so those columns map to exactly zero.
struct FeatureScaler {
    std::vector<double> means;
    std::vector<double> stds;

    Matrix transform(const Matrix& x) const;
    Matrix inverse(const Matrix& x) const;
};

FeatureScaler fit_feature_scaler(const Matrix& train_features);

struct SplitSpec {
    double train_frac = 0.7;
    double val_frac = 0.1;
    double test_frac = 0.2;
    std::uint64_t seed = 0;
    bool stratify = true;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

// Index-level split. Stratification uses the binary labels (event flags for
// survival data). Deterministic under a fixed spec.
SplitIndices split_indices(std::size_t n, const std::vector<int>& strata, const SplitSpec& spec);

Dataset take(const Dataset& ds, const std::vector<std::size_t>& idx);
SurvivalDataset take(const SurvivalDataset& ds, const std::vector<std::size_t>& idx);

template <typename D>
std::tuple<D, D, D> split(const D& ds, const SplitSpec& spec) {
    std::vector<int> strata;
    if constexpr (std::is_same_v<D, Dataset>) {
        strata = ds.labels;
    } else {
        strata = ds.events;
    }
    SplitIndices idx = split_indices(ds.n(), spec.stratify ? strata : std::vector<int>{}, spec);
    return {take(ds, idx.train), take(ds, idx.val), take(ds, idx.test)};
}

}  // namespace tabdc::data
