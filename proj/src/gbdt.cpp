#include "tabdc/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "tabdc/errors.hpp"
#include "tabdc/rng.hpp"

namespace tabdc::model {

namespace {

constexpr double kHessFloor = 1e-6;

double sigmoid(double m) { return 1.0 / (1.0 + std::exp(-m)); }

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

// standard normal pdf / survival, with an asymptotic fallback for the
// hazard when the survival function underflows
double norm_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}
double norm_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }
double norm_hazard(double z) {
    const double s = norm_sf(z);
    if (s < 1e-300) return z + 1.0 / std::max(z, 1.0);
    return norm_pdf(z) / s;
}

struct Targets {
    // y holds labels (logistic/squared) or log-times (aft)
    std::vector<double> y;
    std::vector<int> censored;  // aft only: 1 = right-censored
    std::vector<double> weight;
};

void grad_hess(Objective obj, double aft_sigma, const Targets& t, const std::vector<double>& margin,
               std::vector<double>& g, std::vector<double>& h) {
    const std::size_t n = t.y.size();
    g.resize(n);
    h.resize(n);
    switch (obj) {
        case Objective::logistic:
            for (std::size_t i = 0; i < n; ++i) {
                const double p = sigmoid(margin[i]);
                g[i] = (p - t.y[i]) * t.weight[i];
                h[i] = std::max(p * (1.0 - p), kHessFloor) * t.weight[i];
            }
            break;
        case Objective::squared:
            for (std::size_t i = 0; i < n; ++i) {
                g[i] = (margin[i] - t.y[i]) * t.weight[i];
                h[i] = t.weight[i];
            }
            break;
        case Objective::aft_normal: {
            const double s = aft_sigma;
            for (std::size_t i = 0; i < n; ++i) {
                const double z = (t.y[i] - margin[i]) / s;
                if (t.censored[i]) {
                    const double hz = norm_hazard(z);
                    g[i] = -hz / s;
                    h[i] = std::max(hz * (hz - z), kHessFloor) / (s * s);
                } else {
                    g[i] = -z / s;
                    h[i] = 1.0 / (s * s);
                }
                g[i] *= t.weight[i];
                h[i] *= t.weight[i];
            }
            break;
        }
    }
}

double loss_value(Objective obj, double aft_sigma, const Targets& t,
                  const std::vector<double>& margin) {
    const std::size_t n = t.y.size();
    double total = 0.0;
    switch (obj) {
        case Objective::logistic:
            for (std::size_t i = 0; i < n; ++i) {
                const double p = clamp_prob(sigmoid(margin[i]));
                total += -(t.y[i] * std::log(p) + (1.0 - t.y[i]) * std::log(1.0 - p));
            }
            break;
        case Objective::squared:
            for (std::size_t i = 0; i < n; ++i) {
                const double r = margin[i] - t.y[i];
                total += 0.5 * r * r;
            }
            break;
        case Objective::aft_normal: {
            const double s = aft_sigma;
            const double log_norm = std::log(s) + 0.5 * std::log(2.0 * std::numbers::pi);
            for (std::size_t i = 0; i < n; ++i) {
                const double z = (t.y[i] - margin[i]) / s;
                if (t.censored[i]) {
                    const double sf = norm_sf(z);
                    total += sf < 1e-300 ? 0.5 * z * z + std::log(std::max(z, 1.0)) : -std::log(sf);
                } else {
                    total += 0.5 * z * z + log_norm;
                }
            }
            break;
        }
    }
    return total / static_cast<double>(n);
}

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, const std::vector<double>& g, const std::vector<double>& h,
                const GbdtConfig& cfg)
        : x_(x), g_(g), h_(h), cfg_(cfg) {}

    Tree build(std::vector<std::size_t> rows) {
        Tree tree;
        grow(tree, std::move(rows), 0);
        return tree;
    }

private:
    int grow(Tree& tree, std::vector<std::size_t> rows, int depth) {
        double gsum = 0.0, hsum = 0.0;
        for (std::size_t i : rows) {
            gsum += g_[i];
            hsum += h_[i];
        }
        const int node_idx = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});

        SplitCandidate best;
        if (depth < cfg_.max_depth &&
            rows.size() >= 2 * static_cast<std::size_t>(cfg_.min_samples_leaf))
            best = find_split(rows, gsum, hsum);

        if (best.feature < 0) {
            tree.nodes[node_idx].value = -gsum / (hsum + cfg_.l2_leaf);
            return node_idx;
        }

        std::vector<std::size_t> left, right;
        left.reserve(rows.size());
        right.reserve(rows.size());
        for (std::size_t i : rows)
            (x_(i, static_cast<std::size_t>(best.feature)) < best.threshold ? left : right)
                .push_back(i);
        rows.clear();
        rows.shrink_to_fit();

        const int l = grow(tree, std::move(left), depth + 1);
        const int r = grow(tree, std::move(right), depth + 1);
        tree.nodes[node_idx].feature = best.feature;
        tree.nodes[node_idx].threshold = best.threshold;
        tree.nodes[node_idx].left = l;
        tree.nodes[node_idx].right = r;
        return node_idx;
    }

    SplitCandidate find_split(const std::vector<std::size_t>& rows, double gsum, double hsum) {
        SplitCandidate best;
        const double parent_score = gsum * gsum / (hsum + cfg_.l2_leaf);
        std::vector<std::size_t> order(rows);
        for (std::size_t j = 0; j < x_.cols(); ++j) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const double va = x_(a, j), vb = x_(b, j);
                if (va != vb) return va < vb;
                return a < b;  // deterministic tie order
            });
            double gl = 0.0, hl = 0.0;
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                gl += g_[order[k]];
                hl += h_[order[k]];
                const double v = x_(order[k], j), vnext = x_(order[k + 1], j);
                if (v == vnext) continue;
                const std::size_t n_left = k + 1, n_right = order.size() - n_left;
                if (n_left < static_cast<std::size_t>(cfg_.min_samples_leaf) ||
                    n_right < static_cast<std::size_t>(cfg_.min_samples_leaf))
                    continue;
                const double gr = gsum - gl, hr = hsum - hl;
                const double gain = 0.5 * (gl * gl / (hl + cfg_.l2_leaf) +
                                           gr * gr / (hr + cfg_.l2_leaf) - parent_score);
                if (gain > best.gain + 1e-12) {
                    best.gain = gain;
                    best.feature = static_cast<int>(j);
                    best.threshold = 0.5 * (v + vnext);
                }
            }
        }
        return best;
    }

    const Matrix& x_;
    const std::vector<double>& g_;
    const std::vector<double>& h_;
    const GbdtConfig& cfg_;
};

std::vector<std::size_t> subsample_rows(std::size_t n, double frac, std::uint64_t key) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    if (frac >= 1.0) return rows;
    const std::size_t keep = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                          std::floor(frac * static_cast<double>(n))));
    rng::Stream rs(key);
    for (std::size_t i = 0; i < keep; ++i) {
        const std::size_t j = i + rs.uniform_int(n - i);
        std::swap(rows[i], rows[j]);
    }
    rows.resize(keep);
    std::sort(rows.begin(), rows.end());
    return rows;
}

std::unique_ptr<GbdtModel> boost(const Matrix& x, const Targets& train, const Matrix* xval,
                                 const Targets* val, Task task, const GbdtConfig& cfg) {
    cfg.validate();
    if (x.rows() == 0) throw ConfigError("train_gbdt: empty training data");

    double base = 0.0;
    switch (cfg.objective) {
        case Objective::logistic: {
            double wsum = 0.0, wy = 0.0;
            for (std::size_t i = 0; i < train.y.size(); ++i) {
                wsum += train.weight[i];
                wy += train.weight[i] * train.y[i];
            }
            const double p = clamp_prob(wy / wsum);
            base = std::log(p / (1.0 - p));
            break;
        }
        case Objective::squared: {
            base = std::accumulate(train.y.begin(), train.y.end(), 0.0) /
                   static_cast<double>(train.y.size());
            break;
        }
        case Objective::aft_normal: {
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t i = 0; i < train.y.size(); ++i)
                if (!train.censored[i]) {
                    sum += train.y[i];
                    ++count;
                }
            base = sum / static_cast<double>(count);
            break;
        }
    }

    std::vector<double> margin(x.rows(), base);
    std::vector<double> val_margin(xval ? xval->rows() : 0, base);
    std::vector<double> g, h;
    std::vector<Tree> trees;
    std::vector<double> train_hist, val_hist;

    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_rounds = 0;

    for (int round = 0; round < cfg.rounds; ++round) {
        grad_hess(cfg.objective, cfg.aft_sigma, train, margin, g, h);
        auto rows = subsample_rows(x.rows(), cfg.subsample_fraction,
                                   rng::derive_key({cfg.seed, 0x67626474ULL,
                                                    static_cast<std::uint64_t>(round)}));
        TreeBuilder builder(x, g, h, cfg);
        Tree tree = builder.build(std::move(rows));
        for (auto& node : tree.nodes)
            if (node.is_leaf()) node.value *= cfg.learning_rate;

        for (std::size_t i = 0; i < x.rows(); ++i) margin[i] += tree.predict_row(x.row(i));
        trees.push_back(std::move(tree));
        train_hist.push_back(loss_value(cfg.objective, cfg.aft_sigma, train, margin));

        if (xval) {
            for (std::size_t i = 0; i < xval->rows(); ++i)
                val_margin[i] += trees.back().predict_row(xval->row(i));
            const double vl = loss_value(cfg.objective, cfg.aft_sigma, *val, val_margin);
            val_hist.push_back(vl);
            if (vl < best_val - 1e-12) {
                best_val = vl;
                best_rounds = trees.size();
            }
            if (trees.size() >= static_cast<std::size_t>(cfg.min_rounds) &&
                trees.size() - best_rounds >= static_cast<std::size_t>(cfg.patience))
                break;
        }
    }
    if (xval && best_rounds > 0) trees.resize(best_rounds);

    auto model = std::make_unique<GbdtModel>(task, cfg.objective, base, cfg.aft_sigma,
                                             std::move(trees), x.cols());
    model->train_loss_history = std::move(train_hist);
    model->val_metric_history = std::move(val_hist);
    return model;
}

Targets classification_targets(const data::Dataset& ds, bool class_weighting) {
    Targets t;
    t.y.assign(ds.labels.begin(), ds.labels.end());
    t.weight.assign(ds.n(), 1.0);
    const auto n_pos = static_cast<double>(std::count(ds.labels.begin(), ds.labels.end(), 1));
    const auto n = static_cast<double>(ds.n());
    if (n_pos == 0.0 || n_pos == n)
        throw ConfigError("train_gbdt: training labels are all one class");
    if (class_weighting)
        for (std::size_t i = 0; i < ds.n(); ++i)
            t.weight[i] = ds.labels[i] == 1 ? n / (2.0 * n_pos) : n / (2.0 * (n - n_pos));
    return t;
}

Targets survival_targets(const data::SurvivalDataset& ds) {
    if (ds.n_events() == 0) throw ConfigError("train_gbdt: no uncensored events");
    Targets t;
    t.y.resize(ds.n());
    t.censored.resize(ds.n());
    t.weight.assign(ds.n(), 1.0);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        t.y[i] = std::log(ds.times[i]);
        t.censored[i] = ds.events[i] == 0 ? 1 : 0;
    }
    return t;
}

}  // namespace

void GbdtConfig::validate() const {
    if (rounds < 1) throw ConfigError("gbdt: rounds must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0))
        throw ConfigError("gbdt: learning_rate must lie in (0,1]");
    if (max_depth < 1) throw ConfigError("gbdt: max_depth must be >= 1");
    if (!(subsample_fraction > 0.0 && subsample_fraction <= 1.0))
        throw ConfigError("gbdt: subsample_fraction must lie in (0,1]");
    if (!(aft_sigma > 0.0)) throw ConfigError("gbdt: aft_sigma must be positive");
    if (l2_leaf < 0.0) throw ConfigError("gbdt: l2_leaf must be >= 0");
    if (min_samples_leaf < 1) throw ConfigError("gbdt: min_samples_leaf must be >= 1");
}

std::string objective_name(Objective o) {
    switch (o) {
        case Objective::logistic: return "logistic";
        case Objective::squared: return "squared";
        case Objective::aft_normal: return "aft_normal";
    }
    return "?";
}

Objective objective_from_name(const std::string& name) {
    if (name == "logistic") return Objective::logistic;
    if (name == "squared") return Objective::squared;
    if (name == "aft_normal") return Objective::aft_normal;
    throw ConfigError("unknown gbdt objective '" + name + "'");
}

double GbdtModel::margin(const double* x) const {
    double m = base_score_;
    for (const auto& tree : trees_) m += tree.predict_row(x);
    return m;
}

void GbdtModel::predict_raw(const Matrix& x, std::vector<double>& out) const {
    out.resize(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double m = margin(x.row(i));
        out[i] = objective_ == Objective::logistic ? sigmoid(m) : m;
    }
}

std::vector<double> GbdtModel::split_thresholds(std::size_t feature) const {
    std::vector<double> out;
    for (const auto& tree : trees_)
        for (const auto& node : tree.nodes)
            if (!node.is_leaf() && node.feature == static_cast<int>(feature))
                out.push_back(node.threshold);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

nlohmann::json GbdtModel::to_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : trees_) {
        nlohmann::json t;
        for (const auto& node : tree.nodes) {
            t["feature"].push_back(node.feature);
            t["threshold"].push_back(node.threshold);
            t["left"].push_back(node.left);
            t["right"].push_back(node.right);
            t["value"].push_back(node.value);
        }
        trees.push_back(std::move(t));
    }
    return {{"format_version", kModelFormatVersion},
            {"kind", "gbdt"},
            {"task", task_name(task())},
            {"objective", objective_name(objective_)},
            {"base_score", base_score_},
            {"aft_sigma", aft_sigma_},
            {"n_features", n_features_},
            {"trees", std::move(trees)}};
}

std::unique_ptr<GbdtModel> GbdtModel::from_json(const nlohmann::json& doc) {
    std::vector<Tree> trees;
    for (const auto& t : doc.at("trees")) {
        Tree tree;
        const auto& feature = t.at("feature");
        for (std::size_t i = 0; i < feature.size(); ++i) {
            TreeNode node;
            node.feature = feature[i].get<int>();
            node.threshold = t.at("threshold")[i].get<double>();
            node.left = t.at("left")[i].get<int>();
            node.right = t.at("right")[i].get<int>();
            node.value = t.at("value")[i].get<double>();
            tree.nodes.push_back(node);
        }
        trees.push_back(std::move(tree));
    }
    return std::make_unique<GbdtModel>(
        task_from_name(doc.at("task").get<std::string>()),
        objective_from_name(doc.at("objective").get<std::string>()),
        doc.at("base_score").get<double>(), doc.at("aft_sigma").get<double>(), std::move(trees),
        doc.at("n_features").get<std::size_t>());
}

std::unique_ptr<GbdtModel> train_gbdt(const data::Dataset& train, const data::Dataset* val,
                                      const GbdtConfig& config) {
    if (config.objective == Objective::aft_normal)
        throw ConfigError("train_gbdt: aft_normal objective requires survival data");
    Targets t = classification_targets(train, config.class_weighting);
    Targets v;
    if (val) v = classification_targets(*val, false);
    const Task task =
        config.objective == Objective::logistic ? Task::binary_classification : Task::regression;
    return boost(train.features, t, val ? &val->features : nullptr, val ? &v : nullptr, task,
                 config);
}

std::unique_ptr<GbdtModel> train_gbdt(const data::SurvivalDataset& train,
                                      const data::SurvivalDataset* val, const GbdtConfig& config) {
    if (config.objective != Objective::aft_normal)
        throw ConfigError("train_gbdt: survival data requires the aft_normal objective");
    Targets t = survival_targets(train);
    Targets v;
    if (val) v = survival_targets(*val);
    return boost(train.features, t, val ? &val->features : nullptr, val ? &v : nullptr,
                 Task::aft_log_time, config);
}

std::unique_ptr<GbdtModel> train_gbdt_regressor(const Matrix& x, const std::vector<double>& y,
                                                const GbdtConfig& config) {
    if (config.objective != Objective::squared)
        throw ConfigError("train_gbdt_regressor: objective must be squared");
    if (x.rows() == 0 || x.rows() != y.size())
        throw ConfigError("train_gbdt_regressor: bad shapes");
    Targets t;
    t.y = y;
    t.weight.assign(y.size(), 1.0);
    return boost(x, t, nullptr, nullptr, Task::regression, config);
}

}  // namespace tabdc::model
