#pragma once

#include <array>
#include <cstdint>

#include "tabdc/data.hpp"

namespace tabdc::data {

// Linear effect of the first three features on the Weibull log-scale, and
// the Weibull shape. Exposed so tests can check sign recovery.
inline constexpr std::array<double, 3> kWeibullLogScaleCoeffs{0.8, -0.5, 0.3};
inline constexpr double kWeibullShape = 3.0;

struct BenchmarkParams {
    double delta = 2.0;        // two_gaussians: per-coordinate class-mean separation
    double censor_frac = 0.3;  // weibull_survival: expected fraction of censored rows
};

// Balanced binary classes with unit-covariance Gaussian features. Class
// means sit at -delta/2 and +delta/2 on the first ceil(d/2) coordinates and
// at 0 elsewhere.
Dataset generate_two_gaussians(std::size_t n, std::size_t d, std::uint64_t seed,
                               const BenchmarkParams& params);

// Weibull event times with log-scale b0 + w . x[0:3]; each row is censored
// independently with probability censor_frac, in which case the observed
// time is drawn uniformly below the event time.
SurvivalDataset generate_weibull_survival(std::size_t n, std::size_t d, std::uint64_t seed,
                                          const BenchmarkParams& params);

AnyDataset generate_benchmark(const std::string& kind, std::size_t n, std::size_t d,
                              std::uint64_t seed, const BenchmarkParams& params);

}  // namespace tabdc::data
