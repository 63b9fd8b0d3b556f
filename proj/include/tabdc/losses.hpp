#pragma once

#include <variant>
#include <vector>

#include "tabdc/matrix.hpp"
#include "tabdc/predictor.hpp"

namespace tabdc::engine {

struct ClassificationOutcome {
    std::vector<int> labels;
};

struct SurvivalOutcome {
    std::vector<double> times;
    std::vector<int> events;
};

using Outcome = std::variant<ClassificationOutcome, SurvivalOutcome>;

// The condensed samples: features under optimization, outcomes fixed.
struct SyntheticDataset {
    Matrix x;
    Outcome outcome;

    std::size_t m() const { return x.rows(); }
};

struct LossBreakdown {
    double supervision = 0.0;
    double match = 0.0;
    double alpha = 0.0;
    double total = 0.0;
};

// Mean binary cross-entropy of predictions against fixed labels.
double loss_pred(const std::vector<double>& predictions, const std::vector<int>& labels);

// Sum over classes of |mean prediction on synthetic class c - mean
// prediction on real class c|.
double loss_match_classification(const std::vector<double>& pred_syn,
                                 const std::vector<int>& y_syn,
                                 const std::vector<double>& pred_real,
                                 const std::vector<int>& y_real);

// Negative partial log-likelihood over uncensored rows; the risk set at T_i
// is every row with T_j >= T_i.
double loss_cox(const std::vector<double>& scores, const std::vector<double>& times,
                const std::vector<int>& events);

// Mean Smooth-L1 (transition at 1) of predicted log-times against log T.
double loss_aft(const std::vector<double>& predicted_log_times, const std::vector<double>& times);

// Stratum id per row: rows ordered by (event desc, time asc) and cut into K
// quantile blocks of near-equal size.
std::vector<int> survival_strata(const SurvivalOutcome& outcome, int k_strata);

// Mean over strata of |mean prediction in synthetic stratum - mean
// prediction in the corresponding real stratum|.
double loss_match_survival(const std::vector<double>& pred_syn, const SurvivalOutcome& syn,
                           const std::vector<double>& pred_real, const SurvivalOutcome& real,
                           int k_strata);

// alpha = (l_sup / (l_match + eps)) * rho / (1 - rho), the weight keeping
// the matching share of the composite loss at rho.
double adaptive_alpha(double l_sup, double l_match, double rho, double alpha_eps);

// Composite loss evaluated from precomputed predictions. The task selects
// the supervision term: BCE for classification, the partial likelihood for
// cox_risk, Smooth-L1 on log-times for aft_log_time.
LossBreakdown composite_from_predictions(const std::vector<double>& pred_syn,
                                         const Outcome& outcome_syn,
                                         const std::vector<double>& pred_real,
                                         const Outcome& outcome_real, model::Task task, double rho,
                                         double alpha_eps, int k_strata);

// Convenience overload querying the model for both batches.
LossBreakdown composite_loss(const model::Predictor& model, const Matrix& x_syn,
                             const Outcome& outcome_syn, const Matrix& x_real,
                             const Outcome& outcome_real, double rho, double alpha_eps,
                             int k_strata);

// Analytic d(composite)/d(prediction_i) with alpha held constant. The real
// batch side of the matching term is a constant.
std::vector<double> loss_output_gradient(const std::vector<double>& pred_syn,
                                         const Outcome& outcome_syn,
                                         const std::vector<double>& pred_real,
                                         const Outcome& outcome_real, model::Task task,
                                         double alpha, int k_strata);

// G[i,j] = dl_df[i] * J[i,j]: predictions depend on their own row only, so
// the chain rule reduces to a row-wise broadcast.
Matrix zero_order_gradient(const Matrix& jacobian, const std::vector<double>& dl_df);

}  // namespace tabdc::engine
