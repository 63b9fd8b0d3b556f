#include "tabdc/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "tabdc/errors.hpp"
#include "tabdc/rng.hpp"

namespace tabdc::data {

namespace {
constexpr double kStdFloor = 1e-12;
}

std::size_t SurvivalDataset::n_events() const {
    return static_cast<std::size_t>(std::count(events.begin(), events.end(), 1));
}

void validate(const Dataset& ds) {
    if (ds.features.rows() == 0 || ds.features.cols() == 0)
        throw ConfigError("dataset: empty feature matrix");
    if (ds.labels.size() != ds.features.rows())
        throw ConfigError("dataset: label count does not match row count");
    if (!ds.feature_names.empty() && ds.feature_names.size() != ds.features.cols())
        throw ConfigError("dataset: feature name count does not match column count");
    for (double v : ds.features.values())
        if (!std::isfinite(v)) throw ConfigError("dataset: non-finite feature value");
    for (int y : ds.labels)
        if (y != 0 && y != 1) throw ConfigError("dataset: labels must be 0 or 1");
}

void validate(const SurvivalDataset& ds) {
    if (ds.features.rows() == 0 || ds.features.cols() == 0)
        throw ConfigError("survival dataset: empty feature matrix");
    if (ds.times.size() != ds.features.rows() || ds.events.size() != ds.features.rows())
        throw ConfigError("survival dataset: outcome length does not match row count");
    for (double v : ds.features.values())
        if (!std::isfinite(v)) throw ConfigError("survival dataset: non-finite feature value");
    for (double t : ds.times)
        if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("survival dataset: non-positive duration");
    for (int e : ds.events)
        if (e != 0 && e != 1) throw ConfigError("survival dataset: event flags must be 0 or 1");
    if (ds.n_events() == 0)
        throw ConfigError("survival dataset: no uncensored events");
}

double quantile_type7(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of empty vector");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::pair<std::vector<double>, TimeScaler> scale_survival_times(const std::vector<double>& times,
                                                                const std::vector<int>& events) {
    if (times.size() != events.size())
        throw std::invalid_argument("scale_survival_times: length mismatch");
    std::vector<double> event_times;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] > 0.0)) throw ConfigError("scale_survival_times: non-positive duration");
        if (events[i] == 1) event_times.push_back(times[i]);
    }
    if (event_times.empty())
        throw ConfigError("scale_survival_times: no uncensored events");

    double s = quantile_type7(event_times, 0.75) - quantile_type7(event_times, 0.25);
    if (!(s > 0.0)) s = quantile_type7(event_times, 0.5);
    if (!(s > 0.0))
        throw NumericalError("scale_survival_times: median of event times is zero");

    std::vector<double> scaled(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) scaled[i] = times[i] / s;
    return {std::move(scaled), TimeScaler{s}};
}

FeatureScaler fit_feature_scaler(const Matrix& train) {
    if (train.rows() < 2) throw ConfigError("fit_feature_scaler: need at least 2 rows");
    const std::size_t n = train.rows(), d = train.cols();
    FeatureScaler sc;
    sc.means.assign(d, 0.0);
    sc.stds.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) sc.means[j] += train(i, j);
    for (std::size_t j = 0; j < d; ++j) sc.means[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double c = train(i, j) - sc.means[j];
            sc.stds[j] += c * c;
        }
    for (std::size_t j = 0; j < d; ++j)
        sc.stds[j] = std::max(std::sqrt(sc.stds[j] / static_cast<double>(n)), kStdFloor);
    return sc;
}

Matrix FeatureScaler::transform(const Matrix& x) const {
    if (x.cols() != means.size()) throw std::invalid_argument("FeatureScaler: column mismatch");
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            out(i, j) = (x(i, j) - means[j]) / stds[j];
    return out;
}

Matrix FeatureScaler::inverse(const Matrix& x) const {
    if (x.cols() != means.size()) throw std::invalid_argument("FeatureScaler: column mismatch");
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            out(i, j) = x(i, j) * stds[j] + means[j];
    return out;
}

namespace {

// Largest-remainder apportionment of n into three parts proportional to the
// fractions; every part of a nonzero fraction gets at least its floor.
std::array<std::size_t, 3> apportion(std::size_t n, const SplitSpec& spec) {
    const double fr[3] = {spec.train_frac, spec.val_frac, spec.test_frac};
    std::array<std::size_t, 3> count{};
    double rem[3];
    std::size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
        double exact = fr[k] * static_cast<double>(n);
        count[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        rem[k] = exact - static_cast<double>(count[k]);
        assigned += count[k];
    }
    while (assigned < n) {
        int best = 0;
        for (int k = 1; k < 3; ++k)
            if (rem[k] > rem[best]) best = k;
        ++count[best];
        rem[best] = -1.0;
        ++assigned;
    }
    return count;
}

}  // namespace

SplitIndices split_indices(std::size_t n, const std::vector<int>& strata, const SplitSpec& spec) {
    const double sum = spec.train_frac + spec.val_frac + spec.test_frac;
    if (std::abs(sum - 1.0) > 1e-12)
        throw ConfigError("split: fractions must sum to 1");
    for (double f : {spec.train_frac, spec.val_frac, spec.test_frac})
        if (!(f > 0.0 && f < 1.0)) throw ConfigError("split: fractions must lie in (0,1)");

    const bool stratified = !strata.empty();
    if (stratified && strata.size() != n)
        throw std::invalid_argument("split: strata length mismatch");
    if (stratified && n < 10)
        throw ConfigError("split: stratified splitting needs n >= 10");

    SplitIndices out;
    auto deal = [&](std::vector<std::size_t>& pool, std::uint64_t salt) {
        rng::Stream rs(rng::derive_key({spec.seed, 0x73706c6974ULL, salt}));  // "split"
        rs.shuffle(pool);
        auto counts = apportion(pool.size(), spec);
        std::size_t pos = 0;
        for (std::size_t i = 0; i < counts[0]; ++i) out.train.push_back(pool[pos++]);
        for (std::size_t i = 0; i < counts[1]; ++i) out.val.push_back(pool[pos++]);
        for (std::size_t i = 0; i < counts[2]; ++i) out.test.push_back(pool[pos++]);
    };

    if (!stratified) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        deal(all, 0);
    } else {
        for (int cls : {0, 1}) {
            std::vector<std::size_t> pool;
            for (std::size_t i = 0; i < n; ++i)
                if (strata[i] == cls) pool.push_back(i);
            if (!pool.empty()) deal(pool, static_cast<std::uint64_t>(cls) + 1);
        }
    }

    if (out.train.empty() || out.val.empty() || out.test.empty())
        throw ConfigError("split: fractions leave an empty split for n=" + std::to_string(n));
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

namespace {

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(idx[i], j);
    return out;
}

}  // namespace

Dataset take(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.features = take_rows(ds.features, idx);
    out.labels.reserve(idx.size());
    for (std::size_t i : idx) out.labels.push_back(ds.labels[i]);
    out.feature_names = ds.feature_names;
    return out;
}

SurvivalDataset take(const SurvivalDataset& ds, const std::vector<std::size_t>& idx) {
    SurvivalDataset out;
    out.features = take_rows(ds.features, idx);
    out.times.reserve(idx.size());
    out.events.reserve(idx.size());
    for (std::size_t i : idx) {
        out.times.push_back(ds.times[i]);
        out.events.push_back(ds.events[i]);
    }
    out.feature_names = ds.feature_names;
    return out;
}

}  // namespace tabdc::data
