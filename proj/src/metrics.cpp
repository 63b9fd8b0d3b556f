#include "tabdc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "tabdc/errors.hpp"
#include "tabdc/rng.hpp"

namespace tabdc::metrics {

namespace {

void require_both_classes(const std::vector<int>& labels) {
    bool has0 = false, has1 = false;
    for (int y : labels) (y == 1 ? has1 : has0) = true;
    if (!has0 || !has1) throw NumericalError("metric undefined: only one class present");
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw std::invalid_argument("auroc: bad input sizes");
    require_both_classes(labels);

    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // average ranks over tied score groups
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }

    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t k = 0; k < n; ++k)
        if (labels[k] == 1) {
            rank_sum_pos += rank[k];
            ++n_pos;
        }
    const std::size_t n_neg = n - n_pos;
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

ConfusionMetrics confusion_metrics(const std::vector<double>& scores,
                                   const std::vector<int>& labels, double threshold) {
    if (scores.size() != labels.size() || scores.empty())
        throw std::invalid_argument("confusion_metrics: bad input sizes");
    require_both_classes(labels);

    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        if (labels[i] == 1)
            pred ? ++tp : ++fn;
        else
            pred ? ++fp : ++tn;
    }
    ConfusionMetrics m;
    m.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
    m.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);
    if (tp + fp > 0) m.ppv = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tn + fn > 0) m.npv = static_cast<double>(tn) / static_cast<double>(tn + fn);
    return m;
}

double youden_threshold(const std::vector<double>& scores, const std::vector<int>& labels) {
    require_both_classes(labels);
    std::vector<double> cuts = scores;
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    double best_j = -2.0, best_t = cuts.front();
    for (double t : cuts) {
        auto m = confusion_metrics(scores, labels, t);
        const double j = m.sensitivity + m.specificity - 1.0;
        if (j > best_j + 1e-15) {
            best_j = j;
            best_t = t;
        }
    }
    return best_t;
}

double concordance_index(const std::vector<double>& risk_scores, const std::vector<double>& times,
                         const std::vector<int>& events) {
    const std::size_t n = times.size();
    if (risk_scores.size() != n || events.size() != n)
        throw std::invalid_argument("concordance_index: bad input sizes");

    double comparable = 0.0, credit = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (events[i] != 1) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const bool usable = times[i] < times[j] || (times[i] == times[j] && events[j] == 0);
            if (!usable) continue;
            comparable += 1.0;
            if (risk_scores[i] > risk_scores[j])
                credit += 1.0;
            else if (risk_scores[i] == risk_scores[j])
                credit += 0.5;
        }
    }
    if (comparable == 0.0) throw NumericalError("concordance_index: no comparable pairs");
    return credit / comparable;
}

KmCurve km_curve(const std::vector<double>& times, const std::vector<int>& events) {
    const std::size_t n = times.size();
    if (n == 0 || events.size() != n) throw std::invalid_argument("km_curve: bad input sizes");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    KmCurve curve;
    double s = 1.0;
    std::size_t pos = 0;
    while (pos < n) {
        const double t = times[order[pos]];
        std::size_t deaths = 0, leaving = 0;
        const std::size_t at_risk = n - pos;
        while (pos < n && times[order[pos]] == t) {
            if (events[order[pos]] == 1) ++deaths;
            ++leaving;
            ++pos;
        }
        if (deaths > 0) {
            s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
            curve.event_times.push_back(t);
            curve.survival_probs.push_back(s);
            curve.at_risk_counts.push_back(at_risk);
        }
    }
    return curve;
}

double KmCurve::survival_at(double t) const {
    double s = 1.0;
    for (std::size_t k = 0; k < event_times.size(); ++k) {
        if (event_times[k] <= t)
            s = survival_probs[k];
        else
            break;
    }
    return s;
}

double row_distance(const double* a, const double* b, std::size_t d, Distance metric) {
    switch (metric) {
        case Distance::euclidean: {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double c = a[j] - b[j];
                s += c * c;
            }
            return std::sqrt(s);
        }
        case Distance::manhattan: {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += std::abs(a[j] - b[j]);
            return s;
        }
        case Distance::cosine: {
            const double na = l2_norm(a, d), nb = l2_norm(b, d);
            if (na == 0.0 || nb == 0.0) return 1.0;  // orthogonality convention
            return 1.0 - dot(a, b, d) / (na * nb);
        }
    }
    throw std::invalid_argument("row_distance: unknown metric");
}

std::vector<double> nn_distance_distribution(const Matrix& a, const Matrix& b, Distance metric,
                                             bool exclude_self) {
    if (b.rows() == 0) throw std::invalid_argument("nn_distance_distribution: empty reference set");
    std::vector<double> out(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            if (exclude_self && j == i) continue;
            best = std::min(best, row_distance(a.row(i), b.row(j), a.cols(), metric));
        }
        out[i] = best;
    }
    return out;
}

namespace {

BootstrapCi percentile_ci(std::vector<double> values) {
    BootstrapCi ci;
    double sum = 0.0;
    for (double v : values) sum += v;
    ci.mean = sum / static_cast<double>(values.size());
    std::sort(values.begin(), values.end());
    auto pick = [&](double q) {
        const double h = q * (static_cast<double>(values.size()) - 1.0);
        const std::size_t lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    ci.lo = pick(0.025);
    ci.hi = pick(0.975);
    return ci;
}

constexpr int kMaxRedraws = 100;

}  // namespace

BootstrapCi bootstrap_ci(
    const std::function<double(const std::vector<double>&, const std::vector<int>&)>& metric,
    const std::vector<double>& scores, const std::vector<int>& labels, int n_resamples,
    std::uint64_t seed) {
    if (n_resamples < 100) throw std::invalid_argument("bootstrap_ci: need >= 100 resamples");
    const std::size_t n = scores.size();
    std::vector<std::size_t> pos_idx, neg_idx;
    for (std::size_t i = 0; i < n; ++i) (labels[i] == 1 ? pos_idx : neg_idx).push_back(i);

    std::vector<double> stats;
    stats.reserve(static_cast<std::size_t>(n_resamples));
    for (int r = 0; r < n_resamples; ++r) {
        for (int attempt = 0;; ++attempt) {
            rng::Stream rs(rng::derive_key({seed, 0x626f6f74ULL, static_cast<std::uint64_t>(r),
                                            static_cast<std::uint64_t>(attempt)}));
            std::vector<double> s;
            std::vector<int> y;
            s.reserve(n);
            y.reserve(n);
            auto draw_from = [&](const std::vector<std::size_t>& pool) {
                for (std::size_t k = 0; k < pool.size(); ++k) {
                    const std::size_t i = pool[rs.uniform_int(pool.size())];
                    s.push_back(scores[i]);
                    y.push_back(labels[i]);
                }
            };
            if (!pos_idx.empty() && !neg_idx.empty()) {
                draw_from(pos_idx);
                draw_from(neg_idx);
            } else {
                std::vector<std::size_t> all(n);
                std::iota(all.begin(), all.end(), 0);
                draw_from(all);
            }
            try {
                stats.push_back(metric(s, y));
                break;
            } catch (const std::exception&) {
                if (attempt >= kMaxRedraws)
                    throw NumericalError("bootstrap_ci: metric undefined on repeated resamples");
            }
        }
    }
    return percentile_ci(std::move(stats));
}

BootstrapCi bootstrap_ci_survival(
    const std::function<double(const std::vector<double>&, const std::vector<double>&,
                               const std::vector<int>&)>& metric,
    const std::vector<double>& scores, const std::vector<double>& times,
    const std::vector<int>& events, int n_resamples, std::uint64_t seed) {
    if (n_resamples < 100) throw std::invalid_argument("bootstrap_ci: need >= 100 resamples");
    const std::size_t n = scores.size();

    std::vector<double> stats;
    stats.reserve(static_cast<std::size_t>(n_resamples));
    for (int r = 0; r < n_resamples; ++r) {
        for (int attempt = 0;; ++attempt) {
            rng::Stream rs(rng::derive_key({seed, 0x73626f6f74ULL, static_cast<std::uint64_t>(r),
                                            static_cast<std::uint64_t>(attempt)}));
            std::vector<double> s(n), t(n);
            std::vector<int> e(n);
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t i = rs.uniform_int(n);
                s[k] = scores[i];
                t[k] = times[i];
                e[k] = events[i];
            }
            try {
                stats.push_back(metric(s, t, e));
                break;
            } catch (const std::exception&) {
                if (attempt >= kMaxRedraws)
                    throw NumericalError("bootstrap_ci: metric undefined on repeated resamples");
            }
        }
    }
    return percentile_ci(std::move(stats));
}

}  // namespace tabdc::metrics
