#pragma once

#include <vector>

#include "tabdc/data.hpp"
#include "tabdc/predictor.hpp"

namespace tabdc::model {

// l2-penalized logistic regression fit by Newton with step halving. Serves
// as the differentiable surrogate for validating the finite-difference
// gradient path: input_gradient exposes the analytic d f / d x.
class LogisticModel final : public Predictor {
public:
    LogisticModel(std::vector<double> beta, double intercept)
        : Predictor(Task::binary_classification), beta_(std::move(beta)), intercept_(intercept) {}

    std::size_t n_features() const override { return beta_.size(); }
    const std::vector<double>& beta() const { return beta_; }
    double intercept() const { return intercept_; }

    // analytic f(x)(1 - f(x)) beta, for oracle checks only
    std::vector<double> input_gradient(const double* x) const;

    nlohmann::json to_json() const override;
    static std::unique_ptr<LogisticModel> from_json(const nlohmann::json& doc);

protected:
    void predict_raw(const Matrix& x, std::vector<double>& out) const override;

private:
    std::vector<double> beta_;
    double intercept_ = 0.0;
};

std::unique_ptr<LogisticModel> train_logistic(const data::Dataset& train, double l2_strength,
                                              int max_iters = 200, double tol = 1e-8);

}  // namespace tabdc::model
