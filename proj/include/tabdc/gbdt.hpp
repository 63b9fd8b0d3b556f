#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tabdc/data.hpp"
#include "tabdc/predictor.hpp"

namespace tabdc::model {

enum class Objective { logistic, squared, aft_normal };

std::string objective_name(Objective o);
Objective objective_from_name(const std::string& name);

struct GbdtConfig {
    int rounds = 100;
    double learning_rate = 0.1;
    int max_depth = 5;
    double subsample_fraction = 0.7;
    Objective objective = Objective::logistic;
    double aft_sigma = 1.0;     // scale of the log-normal time distribution
    double l2_leaf = 1.0;
    int min_samples_leaf = 1;
    std::uint64_t seed = 0;
    bool class_weighting = false;  // inverse-prevalence sample weights
    int patience = 10;             // early-stopping rounds without improvement
    int min_rounds = 10;

    void validate() const;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf output, already scaled by the learning rate

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict_row(const double* x) const {
        int idx = 0;
        while (!nodes[idx].is_leaf())
            idx = x[nodes[idx].feature] < nodes[idx].threshold ? nodes[idx].left : nodes[idx].right;
        return nodes[idx].value;
    }
};

// Boosted ensemble of depth-limited regression trees grown by exact greedy
// split search on per-example gradient/hessian statistics.
class GbdtModel final : public Predictor {
public:
    GbdtModel(Task task, Objective objective, double base_score, double aft_sigma,
              std::vector<Tree> trees, std::size_t n_features)
        : Predictor(task),
          objective_(objective),
          base_score_(base_score),
          aft_sigma_(aft_sigma),
          trees_(std::move(trees)),
          n_features_(n_features) {}

    std::size_t n_features() const override { return n_features_; }
    std::size_t n_trees() const { return trees_.size(); }
    Objective objective() const { return objective_; }

    // raw additive score before any link function
    double margin(const double* x) const;

    // all split thresholds used for a feature, ascending (for the
    // piecewise-constancy checks of the finite-difference engine)
    std::vector<double> split_thresholds(std::size_t feature) const;

    nlohmann::json to_json() const override;
    static std::unique_ptr<GbdtModel> from_json(const nlohmann::json& doc);

    // per-round diagnostics from training (not serialized)
    std::vector<double> train_loss_history;
    std::vector<double> val_metric_history;

protected:
    void predict_raw(const Matrix& x, std::vector<double>& out) const override;

private:
    Objective objective_;
    double base_score_;
    double aft_sigma_;
    std::vector<Tree> trees_;
    std::size_t n_features_;
};

// Boosts on (features, gradients, hessians) of the configured objective with
// per-round row subsampling; early-stops on the validation loss when a
// validation set is supplied.
std::unique_ptr<GbdtModel> train_gbdt(const data::Dataset& train, const data::Dataset* val,
                                      const GbdtConfig& config);
std::unique_ptr<GbdtModel> train_gbdt(const data::SurvivalDataset& train,
                                      const data::SurvivalDataset* val, const GbdtConfig& config);

// Regression on an arbitrary target (attack harness usage).
std::unique_ptr<GbdtModel> train_gbdt_regressor(const Matrix& x, const std::vector<double>& y,
                                                const GbdtConfig& config);

}  // namespace tabdc::model
