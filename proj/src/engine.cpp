#include "tabdc/engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "tabdc/errors.hpp"
#include "tabdc/metrics.hpp"
#include "tabdc/rng.hpp"

namespace tabdc::engine {

namespace {

constexpr std::uint64_t kTagInit = 0x696e6974ULL;
constexpr std::uint64_t kTagFd = 0x6664ULL;
constexpr std::uint64_t kTagBatch = 0x6261746368ULL;

Matrix normal_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix x(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        rng::Stream rs(rng::derive_key({seed, kTagInit, i}));
        for (std::size_t j = 0; j < cols; ++j) x(i, j) = rs.normal();
    }
    return x;
}

}  // namespace

void CondenseConfig::validate() const {
    if (ipc < 1) throw ConfigError("condense: ipc must be >= 1");
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("condense: rho must lie in (0,1)");
    if (!(fd_step_lo > 0.0 && fd_step_lo < fd_step_hi))
        throw ConfigError("condense: fd step range must satisfy 0 < lo < hi");
    if (!(optimizer_lr > 0.0)) throw ConfigError("condense: optimizer_lr must be positive");
    if (max_iters < 1) throw ConfigError("condense: max_iters must be >= 1");
    if (eval_every < 1) throw ConfigError("condense: eval_every must be >= 1");
    if (patience < 1) throw ConfigError("condense: patience must be >= 1");
    if (k_strata < 2) throw ConfigError("condense: k_strata must be >= 2");
    if (n_time_bins < 1) throw ConfigError("condense: n_time_bins must be >= 1");
    if (!(class1_fraction > 0.0 && class1_fraction < 1.0))
        throw ConfigError("condense: class1_fraction must lie in (0,1)");
}

SyntheticDataset init_synthetic_classification(int ipc, std::size_t d, double class1_fraction,
                                               std::uint64_t seed) {
    if (ipc < 1) throw ConfigError("init_synthetic_classification: ipc must be >= 1");
    const std::size_t m = 2 * static_cast<std::size_t>(ipc);
    const auto n1 = static_cast<std::size_t>(
        std::llround(class1_fraction * static_cast<double>(m)));
    if (n1 == 0 || n1 == m)
        throw ConfigError("init_synthetic_classification: degenerate class ratio");

    SyntheticDataset syn;
    syn.x = normal_matrix(m, d, seed);
    ClassificationOutcome outcome;
    outcome.labels.assign(m, 0);
    for (std::size_t i = m - n1; i < m; ++i) outcome.labels[i] = 1;
    syn.outcome = std::move(outcome);
    return syn;
}

SyntheticDataset init_synthetic_survival(int m_total, std::size_t d,
                                         const std::vector<double>& real_times,
                                         const std::vector<int>& real_events, int n_bins,
                                         std::uint64_t seed, SurvivalInitInfo* info) {
    if (m_total < 2) throw ConfigError("init_synthetic_survival: need at least 2 rows");
    if (real_times.size() != real_events.size() || real_times.empty())
        throw ConfigError("init_synthetic_survival: bad real outcome arrays");

    double min_event = std::numeric_limits<double>::infinity();
    double max_event = 0.0;
    double max_censor = 0.0;
    bool any_event = false, any_censor = false;
    for (std::size_t i = 0; i < real_times.size(); ++i) {
        if (real_events[i] == 1) {
            any_event = true;
            min_event = std::min(min_event, real_times[i]);
            max_event = std::max(max_event, real_times[i]);
        } else {
            any_censor = true;
            max_censor = std::max(max_censor, real_times[i]);
        }
    }
    if (!any_event) throw ConfigError("init_synthetic_survival: real data has no events");
    if (!any_censor) {
        max_censor = max_event;  // reported fallback
        if (info) info->censor_time_fallback = true;
    } else if (info) {
        info->censor_time_fallback = false;
    }

    double lo = min_event, hi = max_censor;
    if (!(hi > lo)) hi = lo + std::max(lo * 1e-6, 1e-12);

    const std::size_t m = static_cast<std::size_t>(m_total);
    const std::size_t n_uncensored = (m + 1) / 2;

    SyntheticDataset syn;
    syn.x = normal_matrix(m, d, seed);
    SurvivalOutcome outcome;
    outcome.times.resize(m);
    outcome.events.resize(m);
    const double bin_width = (hi - lo) / static_cast<double>(n_bins);
    rng::Stream time_stream(rng::derive_key({seed, kTagInit, 0x74696d65ULL}));
    for (std::size_t i = 0; i < m; ++i) {
        if (i < n_uncensored) {
            const int bin = static_cast<int>(i % static_cast<std::size_t>(n_bins));
            const double bin_lo = lo + bin_width * static_cast<double>(bin);
            outcome.times[i] = bin_lo + bin_width * time_stream.uniform();
            outcome.events[i] = 1;
        } else {
            outcome.times[i] = max_censor;
            outcome.events[i] = 0;
        }
    }
    syn.outcome = std::move(outcome);
    return syn;
}

Matrix estimate_output_jacobian(const model::Predictor& model, const Matrix& x, double fd_lo,
                                double fd_hi, std::uint64_t key, int threads) {
    if (!(fd_lo > 0.0 && fd_lo < fd_hi))
        throw std::invalid_argument("estimate_output_jacobian: invalid step range");
    const std::size_t m = x.rows(), d = x.cols();
    Matrix jac(m, d);

    auto run_columns = [&](std::size_t j_begin, std::size_t j_end) {
        Matrix scratch = x;
        for (std::size_t j = j_begin; j < j_end; ++j) {
            rng::Stream rs(rng::derive_key({key, kTagFd, j}));
            const double eps = rs.uniform(fd_lo, fd_hi);
            for (std::size_t i = 0; i < m; ++i) scratch(i, j) = x(i, j) + eps;
            const std::vector<double> plus = model.predict(scratch);
            for (std::size_t i = 0; i < m; ++i) scratch(i, j) = x(i, j) - eps;
            const std::vector<double> minus = model.predict(scratch);
            for (std::size_t i = 0; i < m; ++i) scratch(i, j) = x(i, j);
            const double inv = 1.0 / (2.0 * eps);
            for (std::size_t i = 0; i < m; ++i) jac(i, j) = (plus[i] - minus[i]) * inv;
        }
    };

    const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(d)));
    if (n_threads == 1) {
        run_columns(0, d);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        const std::size_t chunk = (d + static_cast<std::size_t>(n_threads) - 1) /
                                  static_cast<std::size_t>(n_threads);
        for (int t = 0; t < n_threads; ++t) {
            const std::size_t begin = static_cast<std::size_t>(t) * chunk;
            const std::size_t end = std::min(d, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(run_columns, begin, end);
        }
        for (auto& th : pool) th.join();
    }
    return jac;
}

OptimizerState OptimizerState::create(std::size_t rows, std::size_t cols, double lr) {
    OptimizerState st;
    st.first_moment = Matrix(rows, cols);
    st.second_moment = Matrix(rows, cols);
    st.lr = lr;
    return st;
}

void optimizer_step(OptimizerState& state, Matrix& x, const Matrix& grad) {
    if (!x.same_shape(grad) || !x.same_shape(state.first_moment))
        throw std::invalid_argument("optimizer_step: shape mismatch");
    for (double g : grad.values())
        if (!std::isfinite(g))
            throw NumericalError("optimizer_step: non-finite gradient entry at step " +
                                 std::to_string(state.step_count + 1));

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const double g = grad(i, j);
            double& m1 = state.first_moment(i, j);
            double& m2 = state.second_moment(i, j);
            m1 = state.beta1 * m1 + (1.0 - state.beta1) * g;
            m2 = state.beta2 * m2 + (1.0 - state.beta2) * g * g;
            const double m1_hat = m1 / bc1;
            const double m2_hat = m2 / bc2;
            x(i, j) -= state.lr * m1_hat / (std::sqrt(m2_hat) + state.eps_hat);
        }
    }
}

namespace {

struct RealBatch {
    Matrix x;
    Outcome outcome;
};

// classification: per-class draws matching the synthetic label counts;
// survival: per-group (event / censored) draws matching the synthetic
// event split. Draws are with replacement.
RealBatch sample_real_batch(const data::AnyDataset& real, const Outcome& syn_outcome,
                            std::uint64_t key) {
    RealBatch batch;
    if (const auto* ds = std::get_if<data::Dataset>(&real)) {
        const auto& syn = std::get<ClassificationOutcome>(syn_outcome);
        std::array<std::vector<std::size_t>, 2> pools;
        for (std::size_t i = 0; i < ds->n(); ++i)
            pools[static_cast<std::size_t>(ds->labels[i])].push_back(i);
        std::array<std::size_t, 2> want{0, 0};
        for (int y : syn.labels) ++want[static_cast<std::size_t>(y)];

        ClassificationOutcome out;
        std::vector<std::size_t> chosen;
        for (int cls : {0, 1}) {
            const auto& pool = pools[static_cast<std::size_t>(cls)];
            if (pool.empty())
                throw NumericalError("condense: real data lacks class " + std::to_string(cls));
            rng::Stream rs(rng::derive_key({key, kTagBatch, static_cast<std::uint64_t>(cls)}));
            for (std::size_t k = 0; k < want[static_cast<std::size_t>(cls)]; ++k) {
                chosen.push_back(pool[rs.uniform_int(pool.size())]);
                out.labels.push_back(cls);
            }
        }
        batch.x = Matrix(chosen.size(), ds->d());
        for (std::size_t r = 0; r < chosen.size(); ++r)
            for (std::size_t j = 0; j < ds->d(); ++j) batch.x(r, j) = ds->features(chosen[r], j);
        batch.outcome = std::move(out);
        return batch;
    }

    const auto& ds = std::get<data::SurvivalDataset>(real);
    const auto& syn = std::get<SurvivalOutcome>(syn_outcome);
    std::array<std::vector<std::size_t>, 2> pools;  // [censored, event]
    for (std::size_t i = 0; i < ds.n(); ++i)
        pools[static_cast<std::size_t>(ds.events[i])].push_back(i);
    std::array<std::size_t, 2> want{0, 0};
    for (int e : syn.events) ++want[static_cast<std::size_t>(e)];

    SurvivalOutcome out;
    std::vector<std::size_t> chosen;
    for (int grp : {1, 0}) {
        auto pool = pools[static_cast<std::size_t>(grp)];
        if (pool.empty()) {
            // mirror sampling impossible for this group; draw from all rows
            pool.resize(ds.n());
            std::iota(pool.begin(), pool.end(), 0);
        }
        rng::Stream rs(rng::derive_key({key, kTagBatch, static_cast<std::uint64_t>(grp) + 2}));
        for (std::size_t k = 0; k < want[static_cast<std::size_t>(grp)]; ++k) {
            const std::size_t i = pool[rs.uniform_int(pool.size())];
            chosen.push_back(i);
            out.times.push_back(ds.times[i]);
            out.events.push_back(ds.events[i]);
        }
    }
    batch.x = Matrix(chosen.size(), ds.d());
    for (std::size_t r = 0; r < chosen.size(); ++r)
        for (std::size_t j = 0; j < ds.d(); ++j) batch.x(r, j) = ds.features(chosen[r], j);
    batch.outcome = std::move(out);
    return batch;
}

bool batch_is_degenerate(const Outcome& outcome) {
    if (const auto* c = std::get_if<ClassificationOutcome>(&outcome)) {
        const auto n1 = std::count(c->labels.begin(), c->labels.end(), 1);
        return n1 == 0 || static_cast<std::size_t>(n1) == c->labels.size();
    }
    return std::get<SurvivalOutcome>(outcome).times.empty();
}

std::size_t real_row_count(const data::AnyDataset& real) {
    if (const auto* ds = std::get_if<data::Dataset>(&real)) return ds->n();
    return std::get<data::SurvivalDataset>(real).n();
}

std::size_t real_dim(const data::AnyDataset& real) {
    if (const auto* ds = std::get_if<data::Dataset>(&real)) return ds->d();
    return std::get<data::SurvivalDataset>(real).d();
}

}  // namespace

DownstreamEvaluator make_downstream_evaluator(model::Task task, const model::GbdtConfig& gbdt_cfg,
                                              const model::CoxConfig& cox_cfg) {
    return [task, gbdt_cfg, cox_cfg](const SyntheticDataset& syn,
                                     const data::AnyDataset& val) -> double {
        try {
            if (task == model::Task::binary_classification) {
                const auto& val_ds = std::get<data::Dataset>(val);
                data::Dataset train;
                train.features = syn.x;
                train.labels = std::get<ClassificationOutcome>(syn.outcome).labels;
                auto gcfg = gbdt_cfg;
                gcfg.objective = model::Objective::logistic;
                auto downstream = model::train_gbdt(train, &val_ds, gcfg);
                return metrics::auroc(downstream->predict(val_ds.features), val_ds.labels);
            }
            const auto& val_ds = std::get<data::SurvivalDataset>(val);
            data::SurvivalDataset train;
            train.features = syn.x;
            const auto& so = std::get<SurvivalOutcome>(syn.outcome);
            train.times = so.times;
            train.events = so.events;
            if (task == model::Task::cox_risk) {
                auto downstream = model::train_cox(train, cox_cfg);
                return metrics::concordance_index(downstream->predict(val_ds.features),
                                                  val_ds.times, val_ds.events);
            }
            auto gcfg = gbdt_cfg;
            gcfg.objective = model::Objective::aft_normal;
            auto downstream = model::train_gbdt(train, &val_ds, gcfg);
            std::vector<double> risk = downstream->predict(val_ds.features);
            for (double& r : risk) r = -r;  // longer predicted time = lower risk
            return metrics::concordance_index(risk, val_ds.times, val_ds.events);
        } catch (const std::exception&) {
            return -std::numeric_limits<double>::infinity();
        }
    };
}

CondenseResult condense(const data::AnyDataset& real_train, const data::AnyDataset& real_val,
                        const model::Predictor& ref_model, const CondenseConfig& config,
                        const std::optional<privacy::DpConfig>& dp,
                        const DownstreamEvaluator& evaluator, int threads) {
    config.validate();
    if (dp) dp->validate();
    const std::size_t d = real_dim(real_train);
    if (ref_model.n_features() != d)
        throw ConfigError("condense: model feature count does not match data");

    // synthetic initialization fixed by the task
    SyntheticDataset syn;
    if (std::holds_alternative<data::Dataset>(real_train)) {
        if (ref_model.task() != model::Task::binary_classification)
            throw ConfigError("condense: model task does not match classification data");
        syn = init_synthetic_classification(config.ipc, d, config.class1_fraction, config.seed);
    } else {
        if (ref_model.task() != model::Task::cox_risk &&
            ref_model.task() != model::Task::aft_log_time)
            throw ConfigError("condense: model task does not match survival data");
        const auto& ds = std::get<data::SurvivalDataset>(real_train);
        syn = init_synthetic_survival(2 * config.ipc, d, ds.times, ds.events, config.n_time_bins,
                                      config.seed);
    }
    const std::size_t m = syn.m();
    const double q = static_cast<double>(m) / static_cast<double>(real_row_count(real_train));

    CondenseResult result;
    if (dp) result.ledger.emplace(dp->rdp_orders);
    CondenseHistory& hist = result.history;

    Matrix best_x = syn.x;
    hist.best_iter = 0;
    hist.best_metric = evaluator(syn, real_val);
    hist.evals.push_back({0, hist.best_metric});
    int evals_since_improve = 0;

    OptimizerState opt = OptimizerState::create(m, d, config.optimizer_lr);

    for (int iter = 1; iter <= config.max_iters; ++iter) {
        const std::uint64_t iter_key =
            rng::derive_key({config.seed, 0x69746572ULL, static_cast<std::uint64_t>(iter)});

        RealBatch batch;
        bool batch_ok = false;
        for (int attempt = 0; attempt < 10 && !batch_ok; ++attempt) {
            batch = sample_real_batch(real_train, syn.outcome,
                                      rng::derive_key({iter_key, static_cast<std::uint64_t>(attempt)}));
            batch_ok = !batch_is_degenerate(batch.outcome);
        }
        if (!batch_ok) throw NumericalError("condense: degenerate real batch after 10 resamples");

        const std::vector<double> pred_syn = ref_model.predict(syn.x);
        const std::vector<double> pred_real = ref_model.predict(batch.x);
        const LossBreakdown loss =
            composite_from_predictions(pred_syn, syn.outcome, pred_real, batch.outcome,
                                       ref_model.task(), config.rho, config.alpha_eps,
                                       config.k_strata);
        if (!std::isfinite(loss.total)) {
            hist.aborted_non_finite = true;
            break;  // keep the last good snapshot
        }

        const std::vector<double> dl_df =
            loss_output_gradient(pred_syn, syn.outcome, pred_real, batch.outcome, ref_model.task(),
                                 loss.alpha, config.k_strata);
        const Matrix jac = estimate_output_jacobian(ref_model, syn.x, config.fd_step_lo,
                                                    config.fd_step_hi, iter_key, threads);
        Matrix grad = zero_order_gradient(jac, dl_df);

        double sigma_step = 0.0;
        if (dp) {
            const Matrix clipped = privacy::clip_per_example(grad, dp->clip_norm);
            const auto sel = privacy::select_sigma(privacy::row_norms(clipped), dp->clip_norm, d,
                                                   *dp);
            grad = privacy::noise_gradient(clipped, sel.per_example, dp->clip_norm, dp->noise_seed,
                                           static_cast<std::uint64_t>(iter));
            result.ledger->account_step(q, sel.sigma_step);
            sigma_step = sel.sigma_step;
        }

        optimizer_step(opt, syn.x, grad);

        double gnorm = 0.0;
        for (double g : grad.values()) gnorm += g * g;
        hist.iters.push_back({iter, loss, std::sqrt(gnorm), sigma_step});

        if (iter % config.eval_every == 0) {
            const double metric = evaluator(syn, real_val);
            hist.evals.push_back({iter, metric});
            if (metric > hist.best_metric + 1e-12) {
                hist.best_metric = metric;
                hist.best_iter = iter;
                best_x = syn.x;
                evals_since_improve = 0;
            } else if (++evals_since_improve >= config.patience) {
                break;
            }
        }
    }

    result.synthetic.x = std::move(best_x);
    result.synthetic.outcome = syn.outcome;  // labels/outcomes never change
    if (dp) {
        result.privacy = result.ledger->to_epsilon_delta(dp->delta,
                                                         static_cast<std::size_t>(hist.best_iter));
    }
    return result;
}

}  // namespace tabdc::engine
