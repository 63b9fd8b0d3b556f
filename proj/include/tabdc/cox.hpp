#pragma once

#include <vector>

#include "tabdc/data.hpp"
#include "tabdc/predictor.hpp"

namespace tabdc::model {

struct CoxConfig {
    double l2_strength = 1.0;
    int max_iters = 100;
    double tol = 1e-8;

    void validate() const;
};

// Linear risk score beta . x maximizing the l2-penalized partial likelihood
// with Breslow handling of tied event times.
class CoxModel final : public Predictor {
public:
    CoxModel(std::vector<double> beta, int n_iters, double final_grad_norm)
        : Predictor(Task::cox_risk),
          beta_(std::move(beta)),
          n_iters_(n_iters),
          final_grad_norm_(final_grad_norm) {}

    std::size_t n_features() const override { return beta_.size(); }
    const std::vector<double>& beta() const { return beta_; }
    std::vector<double> hazard_ratios() const;  // exp(beta) per feature
    int n_iters() const { return n_iters_; }
    double final_grad_norm() const { return final_grad_norm_; }

    nlohmann::json to_json() const override;
    static std::unique_ptr<CoxModel> from_json(const nlohmann::json& doc);

protected:
    void predict_raw(const Matrix& x, std::vector<double>& out) const override;

private:
    std::vector<double> beta_;
    int n_iters_ = 0;
    double final_grad_norm_ = 0.0;
};

std::unique_ptr<CoxModel> train_cox(const data::SurvivalDataset& train, const CoxConfig& config);

// Negative penalized partial log-likelihood at beta (exposed for tests).
double cox_neg_log_partial_likelihood(const data::SurvivalDataset& ds,
                                      const std::vector<double>& beta, double l2_strength);

}  // namespace tabdc::model
