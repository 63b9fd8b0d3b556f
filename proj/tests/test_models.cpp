#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "tabdc/benchmark.hpp"
#include "tabdc/cox.hpp"
#include "tabdc/errors.hpp"
#include "tabdc/gbdt.hpp"
#include "tabdc/logistic.hpp"
#include "tabdc/metrics.hpp"
#include "tabdc/rng.hpp"
#include "support/oracles.hpp"

using namespace tabdc;

namespace {

std::tuple<data::Dataset, data::Dataset, data::Dataset> gaussian_splits(double delta, std::size_t n,
                                                                        std::size_t d,
                                                                        std::uint64_t seed) {
    data::BenchmarkParams params;
    params.delta = delta;
    auto ds = data::generate_two_gaussians(n, d, seed, params);
    data::SplitSpec spec;
    spec.seed = seed;
    return data::split(ds, spec);
}

}  // namespace

TEST_CASE("gbdt with labels independent of features predicts the base rate") {
    rng::Stream rs(4);
    data::Dataset ds;
    ds.features = Matrix(200, 3);
    for (std::size_t i = 0; i < 200; ++i)
        for (std::size_t j = 0; j < 3; ++j) ds.features(i, j) = rs.normal();
    ds.labels.resize(200);
    for (std::size_t i = 0; i < 200; ++i) ds.labels[i] = static_cast<int>(i % 2);

    model::GbdtConfig cfg;
    cfg.rounds = 1;
    cfg.max_depth = 1;
    cfg.subsample_fraction = 1.0;
    auto m = model::train_gbdt(ds, nullptr, cfg);
    for (double p : m->predict(ds.features)) CHECK(p == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("gbdt separates the benchmark classes about as well as a logistic oracle") {
    auto [train, val, test] = gaussian_splits(3.0, 5000, 10, 21);
    model::GbdtConfig cfg;  // defaults follow the reference configuration
    cfg.seed = 1;
    auto m = model::train_gbdt(train, &val, cfg);
    const double auc_gbdt = metrics::auroc(m->predict(val.features), val.labels);
    CHECK(auc_gbdt >= 0.95);

    auto lr = model::train_logistic(train, 1.0);
    const double auc_lr = metrics::auroc(lr->predict(val.features), val.labels);
    CHECK(auc_lr >= 0.95);
    CHECK(std::abs(auc_gbdt - auc_lr) < 0.05);
}

TEST_CASE("gbdt aft recovers the time ordering on censor-free data") {
    data::BenchmarkParams params;
    params.censor_frac = 0.0;
    auto ds = data::generate_weibull_survival(3000, 5, 8, params);
    auto [scaled, scaler] = data::scale_survival_times(ds.times, ds.events);
    ds.times = scaled;
    data::SplitSpec spec;
    spec.seed = 8;
    auto [train, val, test] = data::split(ds, spec);

    model::GbdtConfig cfg;
    cfg.objective = model::Objective::aft_normal;
    auto m = model::train_gbdt(train, &val, cfg);
    const auto pred = m->predict(test.features);
    std::vector<double> log_t(test.n());
    for (std::size_t i = 0; i < test.n(); ++i) log_t[i] = std::log(test.times[i]);
    CHECK(testoracle::spearman(pred, log_t) >= 0.8);
}

TEST_CASE("gbdt training loss is non-increasing without subsampling") {
    auto [train, val, test] = gaussian_splits(2.0, 600, 4, 3);
    model::GbdtConfig cfg;
    cfg.subsample_fraction = 1.0;
    cfg.rounds = 40;
    auto m = model::train_gbdt(train, nullptr, cfg);
    const auto& hist = m->train_loss_history;
    REQUIRE(hist.size() == 40);
    for (std::size_t r = 1; r < hist.size(); ++r) CHECK(hist[r] <= hist[r - 1] + 1e-12);
}

TEST_CASE("gbdt predictions are piecewise constant between split thresholds") {
    auto [train, val, test] = gaussian_splits(2.0, 400, 3, 17);
    model::GbdtConfig cfg;
    cfg.rounds = 20;
    auto m = model::train_gbdt(train, &val, cfg);

    Matrix probe(1, 3);
    probe(0, 0) = 0.31;
    probe(0, 1) = -0.77;
    probe(0, 2) = 0.05;
    const double before = m->predict(probe)[0];
    // nudge feature 0 within its threshold gap
    const auto cuts = m->split_thresholds(0);
    double lo = -10.0, hi = 10.0;
    for (double c : cuts) {
        if (c <= probe(0, 0)) lo = std::max(lo, c);
        if (c > probe(0, 0)) hi = std::min(hi, c);
    }
    probe(0, 0) = lo + 0.75 * (hi - lo);
    const double after = m->predict(probe)[0];
    CHECK(before == after);
}

TEST_CASE("gbdt error paths") {
    data::Dataset empty;
    model::GbdtConfig cfg;
    CHECK_THROWS_AS(model::train_gbdt(empty, nullptr, cfg), ConfigError);

    data::Dataset oneclass;
    oneclass.features = Matrix(4, 2, 1.0);
    oneclass.labels = {1, 1, 1, 1};
    CHECK_THROWS_AS(model::train_gbdt(oneclass, nullptr, cfg), ConfigError);

    data::SurvivalDataset no_events;
    no_events.features = Matrix(4, 2, 1.0);
    no_events.times = {1, 2, 3, 4};
    no_events.events = {0, 0, 0, 0};
    cfg.objective = model::Objective::aft_normal;
    CHECK_THROWS_AS(model::train_gbdt(no_events, nullptr, cfg), ConfigError);
}

TEST_CASE("predict contract") {
    auto [train, val, test] = gaussian_splits(2.0, 300, 4, 5);
    model::GbdtConfig cfg;
    cfg.rounds = 10;
    auto m = model::train_gbdt(train, &val, cfg);

    SUBCASE("two calls are bitwise identical") {
        const auto a = m->predict(test.features);
        const auto b = m->predict(test.features);
        CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
    }
    SUBCASE("zero rows give an empty vector") {
        CHECK(m->predict(Matrix(0, 4)).empty());
    }
    SUBCASE("duplicated rows give duplicated outputs") {
        Matrix two(2, 4);
        for (std::size_t j = 0; j < 4; ++j) two(0, j) = two(1, j) = test.features(0, j);
        const auto p = m->predict(two);
        CHECK(p[0] == p[1]);
    }
    SUBCASE("dimension mismatch is rejected") {
        CHECK_THROWS(m->predict(Matrix(3, 7)));
    }
    SUBCASE("probabilities are clamped into (0,1)") {
        for (double p : m->predict(test.features)) {
            CHECK(p >= model::kProbClamp);
            CHECK(p <= 1.0 - model::kProbClamp);
        }
    }
}

TEST_CASE("cox recovers a monotone single covariate") {
    data::SurvivalDataset ds;
    ds.features = Matrix(20, 1);
    ds.times.resize(20);
    ds.events.assign(20, 1);
    for (std::size_t i = 0; i < 20; ++i) {
        ds.features(i, 0) = static_cast<double>(i);     // higher covariate ...
        ds.times[i] = static_cast<double>(20 - i);      // ... earlier event
    }
    model::CoxConfig cfg;
    cfg.l2_strength = 0.1;
    auto m = model::train_cox(ds, cfg);
    CHECK(m->beta()[0] > 0.0);
    CHECK(metrics::concordance_index(m->predict(ds.features), ds.times, ds.events) == 1.0);
    CHECK(m->hazard_ratios()[0] == doctest::Approx(std::exp(m->beta()[0])));
}

TEST_CASE("cox coefficient signs match the survival generator") {
    data::BenchmarkParams params;
    params.censor_frac = 0.25;
    auto ds = data::generate_weibull_survival(4000, 5, 31, params);
    auto scaler = data::fit_feature_scaler(ds.features);
    ds.features = scaler.transform(ds.features);
    auto m = model::train_cox(ds, {});
    // longer scale = later event = lower hazard, so signs flip
    for (std::size_t j = 0; j < data::kWeibullLogScaleCoeffs.size(); ++j) {
        if (data::kWeibullLogScaleCoeffs[j] > 0)
            CHECK(m->beta()[j] < 0.0);
        else
            CHECK(m->beta()[j] > 0.0);
    }
}

TEST_CASE("cox on independent covariates stays near zero") {
    rng::Stream rs(77);
    data::SurvivalDataset ds;
    ds.features = Matrix(5000, 3);
    ds.times.resize(5000);
    ds.events.assign(5000, 1);
    for (std::size_t i = 0; i < 5000; ++i) {
        for (std::size_t j = 0; j < 3; ++j) ds.features(i, j) = rs.normal();
        ds.times[i] = -std::log(1.0 - rs.uniform());
        if (!(ds.times[i] > 0.0)) ds.times[i] = 1e-9;
    }
    auto m = model::train_cox(ds, {});
    for (double b : m->beta()) CHECK(std::abs(b) < 0.1);
}

TEST_CASE("cox is invariant to feature translation") {
    data::BenchmarkParams params;
    params.censor_frac = 0.2;
    auto ds = data::generate_weibull_survival(800, 4, 13, params);
    auto m = model::train_cox(ds, {});

    data::SurvivalDataset shifted = ds;
    const std::vector<double> c{1.5, -2.0, 0.25, 3.0};
    for (std::size_t i = 0; i < ds.n(); ++i)
        for (std::size_t j = 0; j < 4; ++j) shifted.features(i, j) += c[j];
    auto m2 = model::train_cox(shifted, {});

    double beta_dot_c = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(m2->beta()[j] == doctest::Approx(m->beta()[j]).epsilon(1e-5));
        beta_dot_c += m->beta()[j] * c[j];
    }
    const auto s1 = m->predict(ds.features);
    const auto s2 = m2->predict(shifted.features);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(s2[i] - s1[i] == doctest::Approx(beta_dot_c).epsilon(1e-4));
    CHECK(metrics::concordance_index(s1, ds.times, ds.events) ==
          doctest::Approx(metrics::concordance_index(s2, ds.times, ds.events)).epsilon(1e-12));
}

TEST_CASE("cox reports non-convergence") {
    data::SurvivalDataset ds;
    ds.features = Matrix(30, 1);
    ds.times.resize(30);
    ds.events.assign(30, 1);
    for (std::size_t i = 0; i < 30; ++i) {
        ds.features(i, 0) = static_cast<double>(i);
        ds.times[i] = static_cast<double>(30 - i);
    }
    model::CoxConfig cfg;
    cfg.l2_strength = 0.0;  // separable ordering, beta diverges
    cfg.max_iters = 3;
    CHECK_THROWS_WITH_AS(model::train_cox(ds, cfg), doctest::Contains("no convergence"),
                         NumericalError);
}

TEST_CASE("logistic regression basics") {
    SUBCASE("|beta| grows as l2 shrinks on separable data") {
        data::Dataset ds;
        ds.features = Matrix(20, 1);
        ds.labels.resize(20);
        for (std::size_t i = 0; i < 20; ++i) {
            ds.features(i, 0) = static_cast<double>(i) - 9.5;
            ds.labels[i] = i >= 10 ? 1 : 0;
        }
        auto strong = model::train_logistic(ds, 1.0);
        auto weak = model::train_logistic(ds, 0.01);
        CHECK(std::abs(weak->beta()[0]) > std::abs(strong->beta()[0]));
        const auto pred = weak->predict(ds.features);
        for (std::size_t i = 1; i < 20; ++i) CHECK(pred[i] >= pred[i - 1]);
    }
    SUBCASE("mirror-symmetric balanced data gives a zero intercept") {
        rng::Stream rs(6);
        data::Dataset ds;
        ds.features = Matrix(400, 2);
        ds.labels.resize(400);
        for (std::size_t i = 0; i < 400; i += 2) {
            for (std::size_t j = 0; j < 2; ++j) {
                const double v = rs.normal() + 0.8;
                ds.features(i, j) = v;
                ds.features(i + 1, j) = -v;
            }
            ds.labels[i] = 1;
            ds.labels[i + 1] = 0;
        }
        auto m = model::train_logistic(ds, 1.0);
        CHECK(std::abs(m->intercept()) < 1e-6);
    }
}

TEST_CASE("logistic analytic input gradient matches finite differences") {
    auto [train, val, test] = gaussian_splits(2.0, 500, 5, 10);
    auto m = model::train_logistic(train, 1.0);

    Matrix x(1, 5);
    for (std::size_t j = 0; j < 5; ++j) x(0, j) = test.features(0, j);
    const auto analytic = m->input_gradient(x.row(0));
    const double h = 1e-5;
    for (std::size_t j = 0; j < 5; ++j) {
        Matrix xp = x, xm = x;
        xp(0, j) += h;
        xm(0, j) -= h;
        const double fd = (m->predict(xp)[0] - m->predict(xm)[0]) / (2.0 * h);
        CHECK(analytic[j] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("model persistence reproduces predictions bitwise") {
    const auto dir = std::filesystem::temp_directory_path();
    auto [train, val, test] = gaussian_splits(2.5, 400, 4, 19);

    SUBCASE("gbdt") {
        model::GbdtConfig cfg;
        cfg.rounds = 25;
        auto m = model::train_gbdt(train, &val, cfg);
        model::save_predictor(*m, dir / "m_gbdt.json");
        auto loaded = model::load_predictor(dir / "m_gbdt.json");
        const auto a = m->predict(test.features);
        const auto b = loaded->predict(test.features);
        CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
        CHECK(loaded->task() == model::Task::binary_classification);
    }
    SUBCASE("cox") {
        data::BenchmarkParams params;
        params.censor_frac = 0.2;
        auto ds = data::generate_weibull_survival(500, 4, 3, params);
        auto m = model::train_cox(ds, {});
        model::save_predictor(*m, dir / "m_cox.json");
        auto loaded = model::load_predictor(dir / "m_cox.json");
        const auto a = m->predict(ds.features);
        const auto b = loaded->predict(ds.features);
        CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
    }
    SUBCASE("logistic") {
        auto m = model::train_logistic(train, 0.5);
        model::save_predictor(*m, dir / "m_lr.json");
        auto loaded = model::load_predictor(dir / "m_lr.json");
        const auto a = m->predict(test.features);
        const auto b = loaded->predict(test.features);
        CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
    }
    SUBCASE("unknown version is rejected") {
        nlohmann::json doc{{"format_version", 99}, {"kind", "gbdt"}};
        CHECK_THROWS_AS(model::predictor_from_json(doc), ConfigError);
    }
}
