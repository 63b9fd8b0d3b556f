#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tabdc/gbdt.hpp"
#include "tabdc/matrix.hpp"
#include "tabdc/metrics.hpp"

namespace tabdc::attack {

struct MiaConfig {
    int k_neighbors = 5;
    int attacker_trees = 100;
    int attacker_depth = 3;
    double attacker_lr = 0.1;
    double train_frac = 0.8;
    int repeats = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};

struct MiaReport {
    MeanSd auroc;
    MeanSd membership_advantage;
    MeanSd tpr_at_fpr10;
    std::optional<double> theoretical_bound;  // present when an epsilon was supplied
};

// Distance summary of a query point against the synthetic set: for each of
// Euclidean / Manhattan / Cosine, the (mean, min, max, std, range) of the
// distances to the k nearest synthetic rows. 5 x 3 = 15 features.
std::vector<double> mia_features(const double* x, std::size_t d, const Matrix& x_syn, int k);

// Max over all score thresholds of TPR - FPR on the exact empirical ROC.
double membership_advantage(const std::vector<double>& scores, const std::vector<int>& labels);

// Largest TPR attainable with FPR <= fpr_cap on the exact empirical ROC.
double tpr_at_fpr(const std::vector<double>& scores, const std::vector<int>& labels,
                  double fpr_cap);

// Distance-feature membership inference: members (label 1) and non-members
// (label 0) are featurized against the released synthetic rows, a boosted
// classifier is trained on a stratified train fraction and scored on the
// rest, repeated over `repeats` splits.
MiaReport run_mia(const Matrix& members, const Matrix& nonmembers, const Matrix& x_syn,
                  const MiaConfig& config, std::optional<double> epsilon = std::nullopt,
                  double delta = 0.0);

struct AiaConfig {
    int estimators = 100;
    double learning_rate = 0.1;
    int max_depth = 3;
    int repeats = 5;
    std::uint64_t seed = 0;
};

struct AiaAttributeReport {
    std::string target;
    bool applicable = true;  // false when the synthetic target is constant
    MeanSd r2;
    std::optional<MeanSd> accuracy;  // binary targets only (threshold 0.5)
    std::optional<MeanSd> auroc;
};

// Trains a boosted regressor on the synthetic rows with the target column
// held out, then measures how well the target of real evaluation rows can
// be recovered (R^2; plus thresholded accuracy/AUROC for binary targets).
AiaAttributeReport run_aia(const Matrix& syn_with_outcomes,
                           const std::vector<std::string>& column_names,
                           const std::string& target_feature, const Matrix& real_eval,
                           const AiaConfig& config);

}  // namespace tabdc::attack
