#include "tabdc/attacks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>

#include "tabdc/errors.hpp"
#include "tabdc/privacy.hpp"
#include "tabdc/rng.hpp"

namespace tabdc::attack {

namespace {

constexpr std::array<metrics::Distance, 3> kMetrics{
    metrics::Distance::euclidean, metrics::Distance::manhattan, metrics::Distance::cosine};

MeanSd mean_sd(const std::vector<double>& values) {
    MeanSd out;
    const double n = static_cast<double>(values.size());
    for (double v : values) out.mean += v;
    out.mean /= n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.sd = std::sqrt(ss / (n - 1.0));
    }
    return out;
}

}  // namespace

void MiaConfig::validate() const {
    if (k_neighbors < 1) throw ConfigError("mia: k_neighbors must be >= 1");
    if (repeats < 1) throw ConfigError("mia: repeats must be >= 1");
    if (!(train_frac > 0.0 && train_frac < 1.0))
        throw ConfigError("mia: train_frac must lie in (0,1)");
}

std::vector<double> mia_features(const double* x, std::size_t d, const Matrix& x_syn, int k) {
    if (k < 1 || static_cast<std::size_t>(k) > x_syn.rows())
        throw std::invalid_argument("mia_features: k exceeds synthetic size");
    std::vector<double> features;
    features.reserve(kMetrics.size() * 5);
    std::vector<double> dist(x_syn.rows());
    for (const auto metric : kMetrics) {
        for (std::size_t j = 0; j < x_syn.rows(); ++j)
            dist[j] = metrics::row_distance(x, x_syn.row(j), d, metric);
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        double mean = 0.0, mn = dist[0], mx = dist[static_cast<std::size_t>(k) - 1];
        for (int j = 0; j < k; ++j) mean += dist[static_cast<std::size_t>(j)];
        mean /= static_cast<double>(k);
        double var = 0.0;
        for (int j = 0; j < k; ++j) {
            const double c = dist[static_cast<std::size_t>(j)] - mean;
            var += c * c;
        }
        const double sd = std::sqrt(var / static_cast<double>(k));
        features.push_back(mean);
        features.push_back(mn);
        features.push_back(mx);
        features.push_back(sd);
        features.push_back(mx - mn);
    }
    return features;
}

double membership_advantage(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::vector<double> cuts = scores;
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    const double n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    const double n_neg = static_cast<double>(labels.size()) - n_pos;
    double best = 0.0;
    for (double t : cuts) {
        double tp = 0.0, fp = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i)
            if (scores[i] >= t) (labels[i] == 1 ? tp : fp) += 1.0;
        best = std::max(best, tp / n_pos - fp / n_neg);
    }
    return best;
}

double tpr_at_fpr(const std::vector<double>& scores, const std::vector<int>& labels,
                  double fpr_cap) {
    std::vector<double> cuts = scores;
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    const double n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    const double n_neg = static_cast<double>(labels.size()) - n_pos;
    double best_tpr = 0.0;
    for (double t : cuts) {
        double tp = 0.0, fp = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i)
            if (scores[i] >= t) (labels[i] == 1 ? tp : fp) += 1.0;
        if (fp / n_neg <= fpr_cap) best_tpr = std::max(best_tpr, tp / n_pos);
    }
    return best_tpr;
}

MiaReport run_mia(const Matrix& members, const Matrix& nonmembers, const Matrix& x_syn,
                  const MiaConfig& config, std::optional<double> epsilon, double delta) {
    config.validate();
    if (members.rows() == 0 || nonmembers.rows() == 0)
        throw ConfigError("run_mia: both member groups must be non-empty");
    if (members.cols() != x_syn.cols() || nonmembers.cols() != x_syn.cols())
        throw ConfigError("run_mia: feature dimension mismatch");

    const std::size_t n = members.rows() + nonmembers.rows();
    Matrix features(n, kMetrics.size() * 5);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < members.rows(); ++i) {
        const auto f = mia_features(members.row(i), members.cols(), x_syn, config.k_neighbors);
        std::copy(f.begin(), f.end(), features.row(i));
        labels[i] = 1;
    }
    for (std::size_t i = 0; i < nonmembers.rows(); ++i) {
        const std::size_t r = members.rows() + i;
        const auto f = mia_features(nonmembers.row(i), nonmembers.cols(), x_syn, config.k_neighbors);
        std::copy(f.begin(), f.end(), features.row(r));
        labels[r] = 0;
    }

    std::vector<double> aurocs, advantages, tprs;
    for (int rep = 0; rep < config.repeats; ++rep) {
        // Stratified shuffle split. The shuffle key is shared across the two
        // classes so equal-sized groups are split by one permutation; when
        // the same row appears as member and non-member, both copies land on
        // the same side instead of letting the attacker memorize one copy.
        std::vector<std::size_t> train_idx, test_idx;
        for (int cls : {0, 1}) {
            std::vector<std::size_t> pool;
            for (std::size_t i = 0; i < n; ++i)
                if (labels[i] == cls) pool.push_back(i);
            rng::Stream rs(rng::derive_key({config.seed, 0x6d6961ULL,
                                            static_cast<std::uint64_t>(rep)}));
            rs.shuffle(pool);
            const auto n_train = static_cast<std::size_t>(
                std::floor(config.train_frac * static_cast<double>(pool.size())));
            for (std::size_t i = 0; i < pool.size(); ++i)
                (i < n_train ? train_idx : test_idx).push_back(pool[i]);
        }
        data::Dataset train;
        train.features = Matrix(train_idx.size(), features.cols());
        for (std::size_t i = 0; i < train_idx.size(); ++i) {
            for (std::size_t j = 0; j < features.cols(); ++j)
                train.features(i, j) = features(train_idx[i], j);
            train.labels.push_back(labels[train_idx[i]]);
        }
        const bool one_class =
            std::count(train.labels.begin(), train.labels.end(), 1) == 0 ||
            std::count(train.labels.begin(), train.labels.end(), 0) == 0;
        if (one_class || test_idx.empty())
            throw NumericalError("run_mia: degenerate single-class attack split");

        model::GbdtConfig attacker;
        attacker.rounds = config.attacker_trees;
        attacker.max_depth = config.attacker_depth;
        attacker.learning_rate = config.attacker_lr;
        attacker.subsample_fraction = 1.0;
        attacker.objective = model::Objective::logistic;
        attacker.seed = rng::derive_key({config.seed, static_cast<std::uint64_t>(rep)});
        auto model = model::train_gbdt(train, nullptr, attacker);

        Matrix test_x(test_idx.size(), features.cols());
        std::vector<int> test_y(test_idx.size());
        for (std::size_t i = 0; i < test_idx.size(); ++i) {
            for (std::size_t j = 0; j < features.cols(); ++j)
                test_x(i, j) = features(test_idx[i], j);
            test_y[i] = labels[test_idx[i]];
        }
        const std::vector<double> scores = model->predict(test_x);
        aurocs.push_back(metrics::auroc(scores, test_y));
        advantages.push_back(membership_advantage(scores, test_y));
        tprs.push_back(tpr_at_fpr(scores, test_y, 0.1));
    }

    MiaReport report;
    report.auroc = mean_sd(aurocs);
    report.membership_advantage = mean_sd(advantages);
    report.tpr_at_fpr10 = mean_sd(tprs);
    if (epsilon) report.theoretical_bound = privacy::membership_advantage_bound(*epsilon, delta);
    return report;
}

AiaAttributeReport run_aia(const Matrix& syn_with_outcomes,
                           const std::vector<std::string>& column_names,
                           const std::string& target_feature, const Matrix& real_eval,
                           const AiaConfig& config) {
    if (column_names.size() != syn_with_outcomes.cols())
        throw ConfigError("run_aia: column name count mismatch");
    if (real_eval.cols() != syn_with_outcomes.cols())
        throw ConfigError("run_aia: real/synthetic schema mismatch");
    const auto it = std::find(column_names.begin(), column_names.end(), target_feature);
    if (it == column_names.end())
        throw ConfigError("run_aia: target feature '" + target_feature + "' not in schema");
    const std::size_t target = static_cast<std::size_t>(it - column_names.begin());

    AiaAttributeReport report;
    report.target = target_feature;

    const std::size_t m = syn_with_outcomes.rows(), d = syn_with_outcomes.cols();
    std::vector<double> y_syn(m);
    for (std::size_t i = 0; i < m; ++i) y_syn[i] = syn_with_outcomes(i, target);
    if (std::adjacent_find(y_syn.begin(), y_syn.end(), std::not_equal_to<>()) == y_syn.end()) {
        report.applicable = false;  // constant target: R^2 undefined on the training side
        return report;
    }

    auto drop_target = [&](const Matrix& src) {
        Matrix out(src.rows(), d - 1);
        for (std::size_t i = 0; i < src.rows(); ++i) {
            std::size_t c = 0;
            for (std::size_t j = 0; j < d; ++j)
                if (j != target) out(i, c++) = src(i, j);
        }
        return out;
    };
    const Matrix x_syn = drop_target(syn_with_outcomes);
    const Matrix x_real = drop_target(real_eval);
    std::vector<double> y_real(real_eval.rows());
    for (std::size_t i = 0; i < real_eval.rows(); ++i) y_real[i] = real_eval(i, target);

    const bool binary = std::all_of(y_real.begin(), y_real.end(),
                                    [](double v) { return v == 0.0 || v == 1.0; });

    double y_mean = std::accumulate(y_real.begin(), y_real.end(), 0.0) /
                    static_cast<double>(y_real.size());
    double ss_tot = 0.0;
    for (double v : y_real) ss_tot += (v - y_mean) * (v - y_mean);

    std::vector<double> r2s, accs, rocs;
    for (int rep = 0; rep < config.repeats; ++rep) {
        model::GbdtConfig rcfg;
        rcfg.rounds = config.estimators;
        rcfg.learning_rate = config.learning_rate;
        rcfg.max_depth = config.max_depth;
        rcfg.objective = model::Objective::squared;
        rcfg.subsample_fraction = 0.8;  // gives the repeat seeds something to vary
        rcfg.seed = rng::derive_key({config.seed, 0x616961ULL, static_cast<std::uint64_t>(rep)});
        auto model = model::train_gbdt_regressor(x_syn, y_syn, rcfg);
        const std::vector<double> pred = model->predict(x_real);

        double ss_res = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i)
            ss_res += (y_real[i] - pred[i]) * (y_real[i] - pred[i]);
        r2s.push_back(ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0);

        if (binary) {
            double correct = 0.0;
            std::vector<int> y_int(y_real.size());
            for (std::size_t i = 0; i < pred.size(); ++i) {
                const int hard = pred[i] >= 0.5 ? 1 : 0;
                y_int[i] = static_cast<int>(y_real[i]);
                if (hard == y_int[i]) correct += 1.0;
            }
            accs.push_back(correct / static_cast<double>(pred.size()));
            try {
                rocs.push_back(metrics::auroc(pred, y_int));
            } catch (const std::exception&) {
                // single-class evaluation set: no AUROC
            }
        }
    }

    report.r2 = mean_sd(r2s);
    if (binary) {
        report.accuracy = mean_sd(accs);
        if (!rocs.empty()) report.auroc = mean_sd(rocs);
    }
    return report;
}

}  // namespace tabdc::attack
