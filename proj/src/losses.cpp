#include "tabdc/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tabdc/errors.hpp"

namespace tabdc::engine {

namespace {

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::array<double, 2> class_means(const std::vector<double>& pred, const std::vector<int>& y,
                                  std::array<std::size_t, 2>* counts = nullptr) {
    std::array<double, 2> sum{0.0, 0.0};
    std::array<std::size_t, 2> cnt{0, 0};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        sum[static_cast<std::size_t>(y[i])] += pred[i];
        ++cnt[static_cast<std::size_t>(y[i])];
    }
    if (cnt[0] == 0 || cnt[1] == 0)
        throw NumericalError("loss_match: a class is absent from a batch");
    if (counts) *counts = cnt;
    return {sum[0] / static_cast<double>(cnt[0]), sum[1] / static_cast<double>(cnt[1])};
}

// log of the risk-set sums: for each row i, log sum over {j : T_j >= T_i} of
// exp(scores[j]), plus the per-row cumulative sum of inverse risk-set masses
// over event times at or before T_i (used by the analytic gradient).
struct CoxRiskSets {
    std::vector<double> log_s0;        // per row, at that row's time
    std::vector<double> inv_s0_cumul;  // sum over events k with T_k <= T_i of 1/S0(T_k), shifted units
    double shift = 0.0;                // scores were shifted by this before exp
};

CoxRiskSets cox_risk_sets(const std::vector<double>& scores, const std::vector<double>& times,
                          const std::vector<int>& events) {
    const std::size_t m = scores.size();
    CoxRiskSets rs;
    rs.log_s0.assign(m, 0.0);
    rs.inv_s0_cumul.assign(m, 0.0);
    rs.shift = *std::max_element(scores.begin(), scores.end());

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });

    // descending sweep: accumulate exp sums; group ties so the risk set is
    // { j : T_j >= t } exactly
    std::vector<double> s0_at_rank(m, 0.0);
    double acc = 0.0;
    std::size_t pos = 0;
    while (pos < m) {
        const double t = times[order[pos]];
        std::size_t first = pos;
        while (pos < m && times[order[pos]] == t) {
            acc += std::exp(scores[order[pos]] - rs.shift);
            ++pos;
        }
        for (std::size_t k = first; k < pos; ++k) s0_at_rank[k] = acc;
    }
    for (std::size_t k = 0; k < m; ++k)
        rs.log_s0[order[k]] = std::log(s0_at_rank[k]) + rs.shift;

    // ascending sweep over time groups accumulating 1/S0 (shifted units);
    // events tied with a row's own time are included in its cumulative sum
    double inv_acc = 0.0;
    std::size_t end = m;
    while (end > 0) {
        const double t = times[order[end - 1]];
        std::size_t begin = end;
        while (begin > 0 && times[order[begin - 1]] == t) --begin;
        for (std::size_t k = begin; k < end; ++k)
            if (events[order[k]] == 1) inv_acc += 1.0 / s0_at_rank[k];
        for (std::size_t k = begin; k < end; ++k) rs.inv_s0_cumul[order[k]] = inv_acc;
        end = begin;
    }
    return rs;
}

}  // namespace

double loss_pred(const std::vector<double>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size() || predictions.empty())
        throw std::invalid_argument("loss_pred: bad input sizes");
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double f = predictions[i];
        if (!(f > 0.0 && f < 1.0))
            throw std::invalid_argument("loss_pred: predictions must lie in (0,1)");
        total += labels[i] == 1 ? -std::log(f) : -std::log(1.0 - f);
    }
    return total / static_cast<double>(predictions.size());
}

double loss_match_classification(const std::vector<double>& pred_syn,
                                 const std::vector<int>& y_syn,
                                 const std::vector<double>& pred_real,
                                 const std::vector<int>& y_real) {
    const auto syn = class_means(pred_syn, y_syn);
    const auto real = class_means(pred_real, y_real);
    return std::abs(syn[0] - real[0]) + std::abs(syn[1] - real[1]);
}

double loss_cox(const std::vector<double>& scores, const std::vector<double>& times,
                const std::vector<int>& events) {
    const std::size_t m = scores.size();
    if (times.size() != m || events.size() != m || m == 0)
        throw std::invalid_argument("loss_cox: bad input sizes");
    if (std::count(events.begin(), events.end(), 1) == 0)
        throw NumericalError("loss_cox: no uncensored rows");

    const CoxRiskSets rs = cox_risk_sets(scores, times, events);
    double loss = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        if (events[i] == 1) loss -= scores[i] - rs.log_s0[i];
    return loss;
}

double loss_aft(const std::vector<double>& predicted_log_times, const std::vector<double>& times) {
    if (predicted_log_times.size() != times.size() || times.empty())
        throw std::invalid_argument("loss_aft: bad input sizes");
    double total = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] > 0.0)) throw std::invalid_argument("loss_aft: non-positive time");
        const double r = predicted_log_times[i] - std::log(times[i]);
        total += std::abs(r) < 1.0 ? 0.5 * r * r : std::abs(r) - 0.5;
    }
    return total / static_cast<double>(times.size());
}

std::vector<int> survival_strata(const SurvivalOutcome& outcome, int k_strata) {
    const std::size_t n = outcome.times.size();
    if (k_strata < 1 || static_cast<std::size_t>(k_strata) > n)
        throw NumericalError("survival_strata: k exceeds batch size");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (outcome.events[a] != outcome.events[b]) return outcome.events[a] > outcome.events[b];
        if (outcome.times[a] != outcome.times[b]) return outcome.times[a] < outcome.times[b];
        return a < b;
    });
    std::vector<int> stratum(n);
    for (std::size_t rank = 0; rank < n; ++rank)
        stratum[order[rank]] =
            static_cast<int>(rank * static_cast<std::size_t>(k_strata) / n);
    return stratum;
}

namespace {

std::vector<double> stratum_means(const std::vector<double>& pred, const std::vector<int>& stratum,
                                  int k_strata, std::vector<std::size_t>* counts = nullptr) {
    std::vector<double> sum(static_cast<std::size_t>(k_strata), 0.0);
    std::vector<std::size_t> cnt(static_cast<std::size_t>(k_strata), 0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        sum[static_cast<std::size_t>(stratum[i])] += pred[i];
        ++cnt[static_cast<std::size_t>(stratum[i])];
    }
    for (int k = 0; k < k_strata; ++k) {
        if (cnt[static_cast<std::size_t>(k)] == 0)
            throw NumericalError("loss_match_survival: empty stratum");
        sum[static_cast<std::size_t>(k)] /= static_cast<double>(cnt[static_cast<std::size_t>(k)]);
    }
    if (counts) *counts = cnt;
    return sum;
}

}  // namespace

double loss_match_survival(const std::vector<double>& pred_syn, const SurvivalOutcome& syn,
                           const std::vector<double>& pred_real, const SurvivalOutcome& real,
                           int k_strata) {
    const auto syn_strata = survival_strata(syn, k_strata);
    const auto real_strata = survival_strata(real, k_strata);
    const auto ms = stratum_means(pred_syn, syn_strata, k_strata);
    const auto mr = stratum_means(pred_real, real_strata, k_strata);
    double loss = 0.0;
    for (int k = 0; k < k_strata; ++k)
        loss += std::abs(ms[static_cast<std::size_t>(k)] - mr[static_cast<std::size_t>(k)]);
    return loss / static_cast<double>(k_strata);
}

double adaptive_alpha(double l_sup, double l_match, double rho, double alpha_eps) {
    if (l_sup < 0.0 || l_match < 0.0)
        throw std::invalid_argument("adaptive_alpha: losses must be non-negative");
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("adaptive_alpha: rho not in (0,1)");
    return l_sup / (l_match + alpha_eps) * (rho / (1.0 - rho));
}

LossBreakdown composite_from_predictions(const std::vector<double>& pred_syn,
                                         const Outcome& outcome_syn,
                                         const std::vector<double>& pred_real,
                                         const Outcome& outcome_real, model::Task task, double rho,
                                         double alpha_eps, int k_strata) {
    LossBreakdown out;
    if (task == model::Task::binary_classification) {
        const auto& c = std::get<ClassificationOutcome>(outcome_syn);
        const auto& cr = std::get<ClassificationOutcome>(outcome_real);
        out.supervision = loss_pred(pred_syn, c.labels);
        out.match = loss_match_classification(pred_syn, c.labels, pred_real, cr.labels);
    } else if (task == model::Task::cox_risk || task == model::Task::aft_log_time) {
        const auto& s = std::get<SurvivalOutcome>(outcome_syn);
        const auto& sr = std::get<SurvivalOutcome>(outcome_real);
        out.supervision = task == model::Task::cox_risk ? loss_cox(pred_syn, s.times, s.events)
                                                        : loss_aft(pred_syn, s.times);
        out.match = loss_match_survival(pred_syn, s, pred_real, sr, k_strata);
    } else {
        throw std::invalid_argument("composite loss: unsupported task");
    }
    out.alpha = adaptive_alpha(out.supervision, out.match, rho, alpha_eps);
    out.total = out.supervision + out.alpha * out.match;
    return out;
}

LossBreakdown composite_loss(const model::Predictor& model, const Matrix& x_syn,
                             const Outcome& outcome_syn, const Matrix& x_real,
                             const Outcome& outcome_real, double rho, double alpha_eps,
                             int k_strata) {
    return composite_from_predictions(model.predict(x_syn), outcome_syn, model.predict(x_real),
                                      outcome_real, model.task(), rho, alpha_eps, k_strata);
}

std::vector<double> loss_output_gradient(const std::vector<double>& pred_syn,
                                         const Outcome& outcome_syn,
                                         const std::vector<double>& pred_real,
                                         const Outcome& outcome_real, model::Task task,
                                         double alpha, int k_strata) {
    const std::size_t m = pred_syn.size();
    std::vector<double> grad(m, 0.0);
    const double inv_m = 1.0 / static_cast<double>(m);

    if (task == model::Task::binary_classification) {
        const auto& c = std::get<ClassificationOutcome>(outcome_syn);
        const auto& cr = std::get<ClassificationOutcome>(outcome_real);
        for (std::size_t i = 0; i < m; ++i) {
            const double f = pred_syn[i];
            grad[i] = inv_m * (c.labels[i] == 1 ? -1.0 / f : 1.0 / (1.0 - f));
        }
        std::array<std::size_t, 2> counts{};
        const auto syn_means = class_means(pred_syn, c.labels, &counts);
        const auto real_means = class_means(pred_real, cr.labels);
        const std::array<double, 2> gap_sign{sgn(syn_means[0] - real_means[0]),
                                             sgn(syn_means[1] - real_means[1])};
        for (std::size_t i = 0; i < m; ++i) {
            const auto cls = static_cast<std::size_t>(c.labels[i]);
            grad[i] += alpha * gap_sign[cls] / static_cast<double>(counts[cls]);
        }
        return grad;
    }

    const auto& s = std::get<SurvivalOutcome>(outcome_syn);
    const auto& sr = std::get<SurvivalOutcome>(outcome_real);
    if (task == model::Task::cox_risk) {
        const CoxRiskSets rs = cox_risk_sets(pred_syn, s.times, s.events);
        for (std::size_t i = 0; i < m; ++i)
            grad[i] = -static_cast<double>(s.events[i]) +
                      std::exp(pred_syn[i] - rs.shift) * rs.inv_s0_cumul[i];
    } else if (task == model::Task::aft_log_time) {
        for (std::size_t i = 0; i < m; ++i) {
            const double r = pred_syn[i] - std::log(s.times[i]);
            grad[i] = std::clamp(r, -1.0, 1.0) * inv_m;
        }
    } else {
        throw std::invalid_argument("loss_output_gradient: unsupported task");
    }

    const auto syn_strata = survival_strata(s, k_strata);
    const auto real_strata = survival_strata(sr, k_strata);
    std::vector<std::size_t> counts;
    const auto ms = stratum_means(pred_syn, syn_strata, k_strata, &counts);
    const auto mr = stratum_means(pred_real, real_strata, k_strata);
    for (std::size_t i = 0; i < m; ++i) {
        const auto k = static_cast<std::size_t>(syn_strata[i]);
        grad[i] += alpha * sgn(ms[k] - mr[k]) /
                   (static_cast<double>(k_strata) * static_cast<double>(counts[k]));
    }
    return grad;
}

Matrix zero_order_gradient(const Matrix& jacobian, const std::vector<double>& dl_df) {
    if (jacobian.rows() != dl_df.size())
        throw std::invalid_argument("zero_order_gradient: shape mismatch");
    Matrix g = jacobian;
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) *= dl_df[i];
    return g;
}

}  // namespace tabdc::engine
