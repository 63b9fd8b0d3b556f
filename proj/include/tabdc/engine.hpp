#pragma once

#include <functional>
#include <optional>

#include "tabdc/cox.hpp"
#include "tabdc/data.hpp"
#include "tabdc/gbdt.hpp"
#include "tabdc/losses.hpp"
#include "tabdc/privacy.hpp"

namespace tabdc::engine {

struct CondenseConfig {
    int ipc = 50;              // synthetic instances per class (per outcome group for survival)
    double rho = 0.1;          // target matching share of the composite loss
    double alpha_eps = 1e-12;  // stability constant in the alpha formula
    double fd_step_lo = 0.025;
    double fd_step_hi = 2.0;
    double optimizer_lr = 0.001;
    int max_iters = 2000;
    int eval_every = 50;
    int patience = 5;   // downstream evaluations without improvement
    int k_strata = 4;   // survival matching strata
    int n_time_bins = 5;
    double class1_fraction = 0.5;  // classification label composition
    std::uint64_t seed = 0;

    void validate() const;
};

// m = 2 * ipc rows with fixed labels (class1_fraction of them 1) and
// standard-normal features in the standardized space.
SyntheticDataset init_synthetic_classification(int ipc, std::size_t d, double class1_fraction,
                                               std::uint64_t seed);

struct SurvivalInitInfo {
    bool censor_time_fallback = false;  // no censored rows: used max event time
};

// ceil(m/2) uncensored rows with times drawn uniformly within n_bins
// equal-width bins (bins visited round-robin) spanning [min event time, max
// censor time]; the rest censored at the maximum observed censoring time.
SyntheticDataset init_synthetic_survival(int m, std::size_t d, const std::vector<double>& real_times,
                                         const std::vector<int>& real_events, int n_bins,
                                         std::uint64_t seed, SurvivalInitInfo* info = nullptr);

// Symmetric finite differences over each feature column: one step size per
// column drawn uniformly from [fd_lo, fd_hi) out of a stream keyed by
// (key, column), and exactly 2 d batched model evaluations. Columns may be
// evaluated on several threads; results are bit-identical either way.
Matrix estimate_output_jacobian(const model::Predictor& model, const Matrix& x, double fd_lo,
                                double fd_hi, std::uint64_t key, int threads = 1);

struct OptimizerState {
    Matrix first_moment;
    Matrix second_moment;
    long step_count = 0;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_hat = 1e-8;

    static OptimizerState create(std::size_t rows, std::size_t cols, double lr);
};

// Bias-corrected adaptive-moment update in place.
void optimizer_step(OptimizerState& state, Matrix& x, const Matrix& grad);

struct IterRecord {
    int iter = 0;
    LossBreakdown loss;
    double grad_norm = 0.0;
    double sigma_step = 0.0;  // 0 when dp is off
};

struct EvalRecord {
    int iter = 0;
    double metric = 0.0;
};

struct CondenseHistory {
    std::vector<IterRecord> iters;
    std::vector<EvalRecord> evals;
    int best_iter = 0;
    double best_metric = 0.0;
    bool aborted_non_finite = false;
};

struct CondenseResult {
    SyntheticDataset synthetic;  // snapshot at the best evaluated iteration
    std::optional<privacy::DpLedger> ledger;          // all steps taken
    std::optional<privacy::PrivacyReport> privacy;    // accounted up to best_iter
    CondenseHistory history;
};

// Trains a throwaway downstream model on the synthetic candidate and scores
// it on the validation data (AUROC or C-index; higher is better). Returns
// -inf when training is impossible on the candidate.
using DownstreamEvaluator =
    std::function<double(const SyntheticDataset&, const data::AnyDataset& val)>;

DownstreamEvaluator make_downstream_evaluator(model::Task task, const model::GbdtConfig& gbdt_cfg,
                                              const model::CoxConfig& cox_cfg);

// The optimization loop: per iteration, sample a real batch mirroring the
// synthetic composition, evaluate the composite loss and its analytic output
// gradient, estimate the model Jacobian by finite differences, form the
// zero-order gradient, optionally privatize it (clip / adaptive sigma /
// noise, one ledger entry per step), and take an optimizer step. Every
// eval_every steps the downstream evaluator scores the candidate; the best
// snapshot wins and patience exhausts the loop.
CondenseResult condense(const data::AnyDataset& real_train, const data::AnyDataset& real_val,
                        const model::Predictor& ref_model, const CondenseConfig& config,
                        const std::optional<privacy::DpConfig>& dp,
                        const DownstreamEvaluator& evaluator, int threads = 1);

}  // namespace tabdc::engine
