#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "tabdc/matrix.hpp"

namespace tabdc::privacy {

std::vector<double> default_rdp_orders();    // 1.5, 2..64, 96, 128, 256
std::vector<double> default_sigma_grid();    // multipliers 0.25 .. 2.0 in steps of 0.25

struct DpConfig {
    double clip_norm = 1.0;     // per-example l2 bound C
    double sigma_base = 1.0;
    std::vector<double> sigma_grid_multipliers = default_sigma_grid();
    double delta = 1e-5;
    std::vector<double> rdp_orders = default_rdp_orders();
    std::uint64_t noise_seed = 0;

    void validate() const;
};

// Scales each row to l2 norm at most clip_norm, direction preserved.
Matrix clip_per_example(const Matrix& g, double clip_norm);

std::vector<double> row_norms(const Matrix& g);

struct SigmaSelection {
    std::vector<double> per_example;  // sigma_i, in units of the clip norm
    double sigma_step = 0.0;          // min_i sigma_i, used for accounting
};

// Per-example noise levels: the largest grid value sigma_base * multiplier
// keeping the signal-to-noise ratio ||g_i|| / (sigma * C * sqrt(d)) at least
// 1, floored at 0.25 * sigma_base. The step sigma for accounting is the
// minimum over examples (worst case).
SigmaSelection select_sigma(const std::vector<double>& clipped_norms, double clip_norm,
                            std::size_t d, const DpConfig& config);

// Adds N(0, sigma_i^2 C^2 I_d) to each clipped row. Noise derives from a
// counter-based stream keyed by (noise_seed, step, row), so results are
// independent of evaluation order.
Matrix noise_gradient(const Matrix& g_clip, const std::vector<double>& sigmas, double clip_norm,
                      std::uint64_t noise_seed, std::uint64_t step);

// Renyi divergence bound of the subsampled Gaussian mechanism at the given
// order. q = 1 gives the exact Gaussian value order / (2 sigma^2); q < 1
// uses the binomial expansion evaluated in log space; non-integer orders are
// upper-bounded by the value at the next integer.
double rdp_subsampled_gaussian(double q, double noise_multiplier, double order);

struct StepRecord {
    double q = 0.0;
    double noise_multiplier = 0.0;  // sigma_step in units of the clip norm
    double sigma_chosen = 0.0;      // same value; kept for the sidecar record
};

struct PrivacyReport {
    double epsilon = 0.0;
    double delta = 0.0;
    double best_order = 0.0;
    std::size_t steps_accounted = 0;
};

// Additive RDP composition over optimization steps.
class DpLedger {
public:
    explicit DpLedger(std::vector<double> orders = default_rdp_orders());

    void account_step(double q, double noise_multiplier);
    void merge(const DpLedger& other);

    std::size_t steps_accounted() const { return records_.size(); }
    const std::vector<StepRecord>& records() const { return records_; }
    const std::vector<double>& orders() const { return orders_; }
    const std::vector<double>& cumulative_rdp() const { return cumulative_; }

    PrivacyReport to_epsilon_delta(double delta) const;
    // Report after only the first `steps` records (for accounting up to an
    // early-stopped iteration).
    PrivacyReport to_epsilon_delta(double delta, std::size_t steps) const;

    nlohmann::json to_json() const;
    static DpLedger from_json(const nlohmann::json& doc);

private:
    std::vector<double> orders_;
    std::vector<double> cumulative_;  // per order
    std::vector<StepRecord> records_;
};

// Theoretical membership-advantage ceiling of any adversary against an
// (epsilon, delta)-DP mechanism.
double membership_advantage_bound(double epsilon, double delta);

}  // namespace tabdc::privacy
