#include "tabdc/benchmark.hpp"

#include <cmath>
#include <string>

#include "tabdc/errors.hpp"
#include "tabdc/rng.hpp"

namespace tabdc::data {

namespace {

void check_common(std::size_t n, std::size_t d) {
    if (n < 100) throw ConfigError("generate_benchmark: n must be >= 100");
    if (d < 2) throw ConfigError("generate_benchmark: d must be >= 2");
}

std::vector<std::string> make_names(std::size_t d) {
    std::vector<std::string> names(d);
    for (std::size_t j = 0; j < d; ++j) names[j] = "f" + std::to_string(j);
    return names;
}

}  // namespace

Dataset generate_two_gaussians(std::size_t n, std::size_t d, std::uint64_t seed,
                               const BenchmarkParams& params) {
    check_common(n, d);
    const std::size_t active = (d + 1) / 2;
    Dataset ds;
    ds.features = Matrix(n, d);
    ds.labels.resize(n);
    ds.feature_names = make_names(d);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % 2);
        ds.labels[i] = y;
        const double shift = (y == 1 ? 0.5 : -0.5) * params.delta;
        rng::Stream rs(rng::derive_key({seed, 0x324761757373ULL, i}));
        for (std::size_t j = 0; j < d; ++j)
            ds.features(i, j) = rs.normal() + (j < active ? shift : 0.0);
    }
    return ds;
}

SurvivalDataset generate_weibull_survival(std::size_t n, std::size_t d, std::uint64_t seed,
                                          const BenchmarkParams& params) {
    check_common(n, d);
    if (d < kWeibullLogScaleCoeffs.size())
        throw ConfigError("generate_benchmark: weibull_survival needs d >= 3");
    if (params.censor_frac < 0.0 || params.censor_frac > 0.9)
        throw ConfigError("generate_benchmark: censor_frac must lie in [0, 0.9]");

    constexpr double b0 = 1.0;
    SurvivalDataset ds;
    ds.features = Matrix(n, d);
    ds.times.resize(n);
    ds.events.resize(n);
    ds.feature_names = make_names(d);
    for (std::size_t i = 0; i < n; ++i) {
        rng::Stream rs(rng::derive_key({seed, 0x57656962756c6cULL, i}));
        for (std::size_t j = 0; j < d; ++j) ds.features(i, j) = rs.normal();
        double log_scale = b0;
        for (std::size_t j = 0; j < kWeibullLogScaleCoeffs.size(); ++j)
            log_scale += kWeibullLogScaleCoeffs[j] * ds.features(i, j);
        double u = rs.uniform();
        while (u <= 0.0) u = rs.uniform();
        const double event_time = std::exp(log_scale) * std::pow(-std::log(u), 1.0 / kWeibullShape);
        const bool censored = rs.uniform() < params.censor_frac;
        if (censored) {
            double frac = rs.uniform();
            while (frac <= 0.0) frac = rs.uniform();
            ds.times[i] = event_time * frac;
            ds.events[i] = 0;
        } else {
            ds.times[i] = event_time;
            ds.events[i] = 1;
        }
        // guard against pathological underflow of the Weibull draw
        if (!(ds.times[i] > 0.0)) ds.times[i] = 1e-12;
    }
    return ds;
}

AnyDataset generate_benchmark(const std::string& kind, std::size_t n, std::size_t d,
                              std::uint64_t seed, const BenchmarkParams& params) {
    if (kind == "two_gaussians") return generate_two_gaussians(n, d, seed, params);
    if (kind == "weibull_survival") return generate_weibull_survival(n, d, seed, params);
    throw ConfigError("generate_benchmark: unknown kind '" + kind + "'");
}

}  // namespace tabdc::data
