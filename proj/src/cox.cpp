#include "tabdc/cox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tabdc/errors.hpp"

namespace tabdc::model {

namespace {

// Gradient and information of the Breslow partial likelihood, computed in a
// single sweep from the largest time down so risk-set sums accumulate.
struct PartialLikelihood {
    double loglik = 0.0;
    std::vector<double> grad;
    Matrix info;  // negative hessian
};

PartialLikelihood evaluate(const data::SurvivalDataset& ds, const std::vector<double>& beta,
                           double l2) {
    const std::size_t n = ds.n(), d = ds.d();
    std::vector<double> eta(n);
    double eta_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        eta[i] = dot(ds.features.row(i), beta.data(), d);
        eta_max = std::max(eta_max, eta[i]);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return ds.times[a] > ds.times[b]; });

    PartialLikelihood out;
    out.grad.assign(d, 0.0);
    out.info = Matrix(d, d);

    double s0 = 0.0;
    std::vector<double> s1(d, 0.0);
    Matrix s2(d, d);
    std::vector<double> mu(d), event_x_sum(d);

    std::size_t pos = 0;
    while (pos < n) {
        const double t = ds.times[order[pos]];
        // absorb everyone entering the risk set at this time
        std::size_t first = pos;
        while (pos < n && ds.times[order[pos]] == t) {
            const std::size_t i = order[pos];
            const double w = std::exp(eta[i] - eta_max);
            s0 += w;
            const double* xi = ds.features.row(i);
            for (std::size_t a = 0; a < d; ++a) {
                s1[a] += w * xi[a];
                for (std::size_t b = a; b < d; ++b) s2(a, b) += w * xi[a] * xi[b];
            }
            ++pos;
        }
        // Breslow term for the events tied at t
        std::size_t deaths = 0;
        std::fill(event_x_sum.begin(), event_x_sum.end(), 0.0);
        double eta_events = 0.0;
        for (std::size_t k = first; k < pos; ++k) {
            const std::size_t i = order[k];
            if (ds.events[i] != 1) continue;
            ++deaths;
            eta_events += eta[i];
            const double* xi = ds.features.row(i);
            for (std::size_t a = 0; a < d; ++a) event_x_sum[a] += xi[a];
        }
        if (deaths == 0) continue;
        const double dd = static_cast<double>(deaths);
        out.loglik += eta_events - dd * (std::log(s0) + eta_max);
        for (std::size_t a = 0; a < d; ++a) {
            mu[a] = s1[a] / s0;
            out.grad[a] += event_x_sum[a] - dd * mu[a];
        }
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = a; b < d; ++b)
                out.info(a, b) += dd * (s2(a, b) / s0 - mu[a] * mu[b]);
    }

    for (std::size_t a = 0; a < d; ++a) {
        out.loglik -= 0.5 * l2 * beta[a] * beta[a];
        out.grad[a] -= l2 * beta[a];
        out.info(a, a) += l2;
        for (std::size_t b = 0; b < a; ++b) out.info(a, b) = out.info(b, a);
    }
    return out;
}

}  // namespace

void CoxConfig::validate() const {
    if (l2_strength < 0.0) throw ConfigError("cox: l2_strength must be >= 0");
    if (max_iters < 1) throw ConfigError("cox: max_iters must be >= 1");
    if (!(tol > 0.0)) throw ConfigError("cox: tol must be positive");
}

double cox_neg_log_partial_likelihood(const data::SurvivalDataset& ds,
                                      const std::vector<double>& beta, double l2_strength) {
    return -evaluate(ds, beta, l2_strength).loglik;
}

std::unique_ptr<CoxModel> train_cox(const data::SurvivalDataset& train, const CoxConfig& config) {
    config.validate();
    data::validate(train);

    const std::size_t d = train.d();
    std::vector<double> beta(d, 0.0);
    PartialLikelihood cur = evaluate(train, beta, config.l2_strength);

    int iter = 0;
    for (; iter < config.max_iters; ++iter) {
        const double gnorm = l2_norm(cur.grad.data(), d);
        if (gnorm < config.tol)
            return std::make_unique<CoxModel>(std::move(beta), iter, gnorm);

        std::vector<double> step = solve_spd(cur.info, cur.grad);
        double scale = 1.0;
        bool improved = false;
        for (int halving = 0; halving < 40; ++halving) {
            std::vector<double> cand(d);
            for (std::size_t a = 0; a < d; ++a) cand[a] = beta[a] + scale * step[a];
            PartialLikelihood next = evaluate(train, cand, config.l2_strength);
            if (std::isfinite(next.loglik) &&
                next.loglik >= cur.loglik - 1e-12 * (1.0 + std::abs(cur.loglik))) {
                beta = std::move(cand);
                cur = std::move(next);
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!improved) break;
    }

    const double gnorm = l2_norm(cur.grad.data(), d);
    if (gnorm < config.tol) return std::make_unique<CoxModel>(std::move(beta), iter, gnorm);
    std::ostringstream msg;
    msg << "train_cox: no convergence in " << config.max_iters
        << " iterations (gradient norm " << gnorm << ", tol " << config.tol << ")";
    throw NumericalError(msg.str());
}

std::vector<double> CoxModel::hazard_ratios() const {
    std::vector<double> hr(beta_.size());
    for (std::size_t j = 0; j < beta_.size(); ++j) hr[j] = std::exp(beta_[j]);
    return hr;
}

void CoxModel::predict_raw(const Matrix& x, std::vector<double>& out) const {
    out.resize(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = dot(x.row(i), beta_.data(), beta_.size());
}

nlohmann::json CoxModel::to_json() const {
    return {{"format_version", kModelFormatVersion},
            {"kind", "cox"},
            {"task", task_name(task())},
            {"beta", beta_},
            {"n_iters", n_iters_},
            {"final_grad_norm", final_grad_norm_}};
}

std::unique_ptr<CoxModel> CoxModel::from_json(const nlohmann::json& doc) {
    return std::make_unique<CoxModel>(doc.at("beta").get<std::vector<double>>(),
                                      doc.value("n_iters", 0), doc.value("final_grad_norm", 0.0));
}

}  // namespace tabdc::model
