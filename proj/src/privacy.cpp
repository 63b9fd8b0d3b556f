#include "tabdc/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tabdc/errors.hpp"
#include "tabdc/rng.hpp"

namespace tabdc::privacy {

std::vector<double> default_rdp_orders() {
    std::vector<double> orders{1.5};
    for (int a = 2; a <= 64; ++a) orders.push_back(static_cast<double>(a));
    orders.push_back(96.0);
    orders.push_back(128.0);
    orders.push_back(256.0);
    return orders;
}

std::vector<double> default_sigma_grid() {
    return {0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
}

void DpConfig::validate() const {
    if (!(clip_norm > 0.0)) throw ConfigError("dp: clip_norm must be positive");
    if (!(sigma_base > 0.0)) throw ConfigError("dp: sigma_base must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("dp: delta must lie in (0,1)");
    if (sigma_grid_multipliers.empty() ||
        !std::is_sorted(sigma_grid_multipliers.begin(), sigma_grid_multipliers.end()))
        throw ConfigError("dp: sigma grid multipliers must be ascending");
    if (sigma_grid_multipliers.front() != 0.25)
        throw ConfigError("dp: sigma grid must start at the 0.25 floor");
    if (rdp_orders.empty()) throw ConfigError("dp: rdp_orders must be non-empty");
    for (double a : rdp_orders)
        if (!(a > 1.0)) throw ConfigError("dp: rdp orders must exceed 1");
}

Matrix clip_per_example(const Matrix& g, double clip_norm) {
    if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_per_example: clip_norm must be > 0");
    Matrix out = g;
    for (std::size_t i = 0; i < g.rows(); ++i) {
        const double norm = l2_norm(g.row(i), g.cols());
        if (norm > clip_norm) {
            const double scale = clip_norm / norm;
            for (std::size_t j = 0; j < g.cols(); ++j) out(i, j) *= scale;
        }
    }
    return out;
}

std::vector<double> row_norms(const Matrix& g) {
    std::vector<double> norms(g.rows());
    for (std::size_t i = 0; i < g.rows(); ++i) norms[i] = l2_norm(g.row(i), g.cols());
    return norms;
}

SigmaSelection select_sigma(const std::vector<double>& clipped_norms, double clip_norm,
                            std::size_t d, const DpConfig& config) {
    config.validate();
    const double floor_sigma = 0.25 * config.sigma_base;
    const double sqrt_d = std::sqrt(static_cast<double>(d));
    SigmaSelection sel;
    sel.per_example.resize(clipped_norms.size());
    sel.sigma_step = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < clipped_norms.size(); ++i) {
        double chosen = floor_sigma;
        for (double mult : config.sigma_grid_multipliers) {
            const double sigma = mult * config.sigma_base;
            const double snr = clipped_norms[i] / (sigma * clip_norm * sqrt_d);
            if (snr >= 1.0) chosen = std::max(chosen, sigma);
        }
        sel.per_example[i] = chosen;
        sel.sigma_step = std::min(sel.sigma_step, chosen);
    }
    if (clipped_norms.empty()) sel.sigma_step = floor_sigma;
    return sel;
}

Matrix noise_gradient(const Matrix& g_clip, const std::vector<double>& sigmas, double clip_norm,
                      std::uint64_t noise_seed, std::uint64_t step) {
    if (sigmas.size() != g_clip.rows())
        throw std::invalid_argument("noise_gradient: sigma count must match rows");
    Matrix out = g_clip;
    for (std::size_t i = 0; i < g_clip.rows(); ++i) {
        rng::Stream rs(rng::derive_key({noise_seed, 0x6e6f697365ULL, step, i}));
        const double std_dev = sigmas[i] * clip_norm;
        for (std::size_t j = 0; j < g_clip.cols(); ++j) out(i, j) += std_dev * rs.normal();
    }
    return out;
}

namespace {

double log_binom(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double log_sum_exp(const std::vector<double>& terms) {
    const double m = *std::max_element(terms.begin(), terms.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    return m + std::log(s);
}

}  // namespace

double rdp_subsampled_gaussian(double q, double noise_multiplier, double order) {
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("rdp: q must lie in (0,1]");
    if (!(noise_multiplier > 0.0)) throw std::invalid_argument("rdp: noise multiplier must be > 0");
    if (!(order > 1.0)) throw std::invalid_argument("rdp: order must exceed 1");

    const double sigma2 = noise_multiplier * noise_multiplier;
    if (q == 1.0) return order / (2.0 * sigma2);

    // non-integer orders: bound by the next integer (RDP is non-decreasing
    // in the order)
    const double alpha_int = std::ceil(order - 1e-12);
    const int alpha = static_cast<int>(alpha_int);

    std::vector<double> log_terms;
    log_terms.reserve(static_cast<std::size_t>(alpha) + 1);
    const double log_q = std::log(q);
    const double log_1mq = std::log1p(-q);
    for (int k = 0; k <= alpha; ++k) {
        const double dk = static_cast<double>(k);
        log_terms.push_back(log_binom(alpha_int, dk) + (alpha_int - dk) * log_1mq + dk * log_q +
                            dk * (dk - 1.0) / (2.0 * sigma2));
    }
    const double log_moment = log_sum_exp(log_terms);
    return std::max(0.0, log_moment / (alpha_int - 1.0));
}

DpLedger::DpLedger(std::vector<double> orders) : orders_(std::move(orders)) {
    if (orders_.empty()) throw std::invalid_argument("DpLedger: empty order list");
    cumulative_.assign(orders_.size(), 0.0);
}

void DpLedger::account_step(double q, double noise_multiplier) {
    for (std::size_t k = 0; k < orders_.size(); ++k)
        cumulative_[k] += rdp_subsampled_gaussian(q, noise_multiplier, orders_[k]);
    records_.push_back({q, noise_multiplier, noise_multiplier});
}

void DpLedger::merge(const DpLedger& other) {
    if (other.orders_ != orders_) throw std::invalid_argument("DpLedger::merge: order grids differ");
    for (std::size_t k = 0; k < orders_.size(); ++k) cumulative_[k] += other.cumulative_[k];
    records_.insert(records_.end(), other.records_.begin(), other.records_.end());
}

PrivacyReport DpLedger::to_epsilon_delta(double delta) const {
    return to_epsilon_delta(delta, records_.size());
}

PrivacyReport DpLedger::to_epsilon_delta(double delta, std::size_t steps) const {
    if (!(delta > 0.0 && delta < 1.0) && delta != 1.0)
        throw std::invalid_argument("to_epsilon_delta: delta must lie in (0,1]");
    steps = std::min(steps, records_.size());

    PrivacyReport report;
    report.delta = delta;
    report.steps_accounted = steps;
    if (steps == 0) {
        report.best_order = orders_.front();
        return report;  // zero accounted steps release nothing: epsilon 0
    }

    std::vector<double> rdp(orders_.size(), 0.0);
    if (steps == records_.size()) {
        rdp = cumulative_;
    } else {
        for (std::size_t s = 0; s < steps; ++s)
            for (std::size_t k = 0; k < orders_.size(); ++k)
                rdp[k] += rdp_subsampled_gaussian(records_[s].q, records_[s].noise_multiplier,
                                                  orders_[k]);
    }

    double best_eps = std::numeric_limits<double>::infinity();
    double best_order = orders_.front();
    for (std::size_t k = 0; k < orders_.size(); ++k) {
        const double eps = rdp[k] + std::log(1.0 / delta) / (orders_[k] - 1.0);
        if (eps < best_eps) {
            best_eps = eps;
            best_order = orders_[k];
        }
    }
    report.epsilon = std::max(0.0, best_eps);
    report.best_order = best_order;
    return report;
}

nlohmann::json DpLedger::to_json() const {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& r : records_)
        steps.push_back({{"q", r.q}, {"noise_multiplier", r.noise_multiplier},
                         {"sigma", r.sigma_chosen}});
    return {{"orders", orders_}, {"cumulative_rdp", cumulative_}, {"steps", std::move(steps)}};
}

DpLedger DpLedger::from_json(const nlohmann::json& doc) {
    DpLedger ledger(doc.at("orders").get<std::vector<double>>());
    ledger.cumulative_ = doc.at("cumulative_rdp").get<std::vector<double>>();
    for (const auto& s : doc.at("steps"))
        ledger.records_.push_back({s.at("q").get<double>(), s.at("noise_multiplier").get<double>(),
                                   s.value("sigma", s.at("noise_multiplier").get<double>())});
    if (ledger.cumulative_.size() != ledger.orders_.size())
        throw ConfigError("dp ledger: cumulative size does not match order grid");
    return ledger;
}

double membership_advantage_bound(double epsilon, double delta) {
    const double e = std::exp(epsilon);
    return (e - 1.0) / (e + 1.0) + delta;
}

}  // namespace tabdc::privacy
