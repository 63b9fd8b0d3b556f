#include "tabdc/logistic.hpp"

#include <algorithm>
#include <cmath>

#include "tabdc/errors.hpp"

namespace tabdc::model {

namespace {

double sigmoid(double m) { return 1.0 / (1.0 + std::exp(-m)); }

// penalized negative log-likelihood; intercept is not penalized
double objective(const data::Dataset& ds, const std::vector<double>& beta, double intercept,
                 double l2) {
    double nll = 0.0;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const double m = intercept + dot(ds.features.row(i), beta.data(), beta.size());
        const double z = ds.labels[i] == 1 ? m : -m;
        // -log sigmoid(z) = log(1 + e^{-z}), stable for both signs
        nll += z > 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
    }
    double pen = 0.0;
    for (double b : beta) pen += b * b;
    return nll + 0.5 * l2 * pen;
}

}  // namespace

std::unique_ptr<LogisticModel> train_logistic(const data::Dataset& train, double l2_strength,
                                              int max_iters, double tol) {
    data::validate(train);
    const std::size_t n = train.n(), d = train.d();
    const bool has0 = std::count(train.labels.begin(), train.labels.end(), 0) > 0;
    const bool has1 = std::count(train.labels.begin(), train.labels.end(), 1) > 0;
    if (!has0 || !has1) throw ConfigError("train_logistic: labels are all one class");

    // parameters: [beta, intercept]
    std::vector<double> theta(d + 1, 0.0);
    double cur_obj = objective(train, std::vector<double>(theta.begin(), theta.begin() + d),
                               theta[d], l2_strength);

    for (int iter = 0; iter < max_iters; ++iter) {
        std::vector<double> grad(d + 1, 0.0);
        Matrix hess(d + 1, d + 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = train.features.row(i);
            const double m = theta[d] + dot(xi, theta.data(), d);
            const double p = sigmoid(m);
            const double r = p - static_cast<double>(train.labels[i]);
            const double w = std::max(p * (1.0 - p), 1e-12);
            for (std::size_t a = 0; a < d; ++a) grad[a] += r * xi[a];
            grad[d] += r;
            for (std::size_t a = 0; a < d; ++a) {
                for (std::size_t b = a; b < d; ++b) hess(a, b) += w * xi[a] * xi[b];
                hess(a, d) += w * xi[a];
            }
            hess(d, d) += w;
        }
        for (std::size_t a = 0; a < d; ++a) {
            grad[a] += l2_strength * theta[a];
            hess(a, a) += l2_strength;
        }
        for (std::size_t a = 0; a <= d; ++a)
            for (std::size_t b = 0; b < a; ++b) hess(a, b) = hess(b, a);

        if (l2_norm(grad.data(), d + 1) < tol) break;

        std::vector<double> step = solve_spd(hess, grad);
        double scale = 1.0;
        bool improved = false;
        for (int halving = 0; halving < 60; ++halving) {
            std::vector<double> cand(d + 1);
            for (std::size_t a = 0; a <= d; ++a) cand[a] = theta[a] - scale * step[a];
            const double obj = objective(train, std::vector<double>(cand.begin(), cand.begin() + d),
                                         cand[d], l2_strength);
            if (obj < cur_obj + 1e-14 && std::isfinite(obj)) {
                theta = std::move(cand);
                cur_obj = obj;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!improved) throw NumericalError("train_logistic: step halving exhausted (divergence)");
    }

    std::vector<double> beta(theta.begin(), theta.begin() + d);
    return std::make_unique<LogisticModel>(std::move(beta), theta[d]);
}

std::vector<double> LogisticModel::input_gradient(const double* x) const {
    const double f = sigmoid(intercept_ + dot(x, beta_.data(), beta_.size()));
    std::vector<double> g(beta_.size());
    for (std::size_t j = 0; j < beta_.size(); ++j) g[j] = f * (1.0 - f) * beta_[j];
    return g;
}

void LogisticModel::predict_raw(const Matrix& x, std::vector<double>& out) const {
    out.resize(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
        out[i] = sigmoid(intercept_ + dot(x.row(i), beta_.data(), beta_.size()));
}

nlohmann::json LogisticModel::to_json() const {
    return {{"format_version", kModelFormatVersion},
            {"kind", "logistic"},
            {"task", task_name(task())},
            {"beta", beta_},
            {"intercept", intercept_}};
}

std::unique_ptr<LogisticModel> LogisticModel::from_json(const nlohmann::json& doc) {
    return std::make_unique<LogisticModel>(doc.at("beta").get<std::vector<double>>(),
                                           doc.at("intercept").get<double>());
}

}  // namespace tabdc::model
