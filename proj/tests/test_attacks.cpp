#include <doctest.h>

#include <cmath>

#include "tabdc/attacks.hpp"
#include "tabdc/benchmark.hpp"
#include "tabdc/errors.hpp"
#include "tabdc/rng.hpp"

using namespace tabdc;

TEST_CASE("mia distance features") {
    SUBCASE("coincident point has zero min distance") {
        Matrix syn = Matrix::from_rows({{1.0, 2.0}, {5.0, 5.0}});
        const double x[2] = {1.0, 2.0};
        const auto f = attack::mia_features(x, 2, syn, 1);
        REQUIRE(f.size() == 15);
        CHECK(f[1] == 0.0);  // euclidean min
        CHECK(f[6] == 0.0);  // manhattan min
    }
    SUBCASE("k = 1 makes std and range vanish for every metric") {
        Matrix syn = Matrix::from_rows({{0.5, -1.0}, {2.0, 3.0}, {-4.0, 0.1}});
        const double x[2] = {0.3, 0.9};
        const auto f = attack::mia_features(x, 2, syn, 1);
        for (std::size_t metric = 0; metric < 3; ++metric) {
            CHECK(f[metric * 5 + 3] == 0.0);  // std
            CHECK(f[metric * 5 + 4] == 0.0);  // range
        }
    }
    SUBCASE("two-point hand computation") {
        Matrix syn = Matrix::from_rows({{0.0}, {2.0}});
        const double x[1] = {0.0};
        const auto f = attack::mia_features(x, 1, syn, 2);
        CHECK(f[0] == doctest::Approx(1.0));  // mean
        CHECK(f[1] == doctest::Approx(0.0));  // min
        CHECK(f[2] == doctest::Approx(2.0));  // max
        CHECK(f[3] == doctest::Approx(1.0));  // population std
        CHECK(f[4] == doctest::Approx(2.0));  // range
    }
    SUBCASE("row order of the synthetic set does not matter") {
        Matrix syn = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}, {3.0, 3.0}});
        Matrix syn_rev = Matrix::from_rows({{3.0, 3.0}, {0.0, 1.0}, {1.0, 0.0}});
        const double x[2] = {0.2, 0.4};
        CHECK(attack::mia_features(x, 2, syn, 2) == attack::mia_features(x, 2, syn_rev, 2));
    }
    SUBCASE("k larger than the synthetic set is rejected") {
        Matrix syn = Matrix::from_rows({{0.0}});
        const double x[1] = {0.0};
        CHECK_THROWS(attack::mia_features(x, 1, syn, 2));
    }
    SUBCASE("cosine distance of a zero vector uses the orthogonality convention") {
        Matrix syn = Matrix::from_rows({{1.0, 1.0}});
        const double x[2] = {0.0, 0.0};
        const auto f = attack::mia_features(x, 2, syn, 1);
        CHECK(f[10] == 1.0);  // cosine mean with k=1
    }
}

TEST_CASE("membership advantage equals the brute-force threshold sweep") {
    rng::Stream rs(31);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 10 + rs.uniform_int(40);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = std::floor(rs.uniform() * 10.0) / 10.0;
            labels[i] = rs.uniform() < 0.5 ? 1 : 0;
        }
        labels[0] = 1;
        labels[1] = 0;
        const double adv = attack::membership_advantage(scores, labels);
        CHECK(adv <= 1.0);
        CHECK(adv >= 0.0);
        // exhaustive sweep over a fine grid must not beat the exact ROC
        double brute = 0.0;
        const double n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
        const double n_neg = static_cast<double>(labels.size()) - n_pos;
        for (double tau = -0.05; tau <= 1.05; tau += 0.001) {
            double tp = 0.0, fp = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (scores[i] >= tau) (labels[i] == 1 ? tp : fp) += 1.0;
            brute = std::max(brute, tp / n_pos - fp / n_neg);
        }
        CHECK(adv == doctest::Approx(brute).epsilon(1e-9));
    }
}

namespace {

Matrix gaussian_rows(std::size_t n, std::size_t d, std::uint64_t seed, double shift = 0.0) {
    Matrix x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        rng::Stream rs(rng::derive_key({seed, i}));
        for (std::size_t j = 0; j < d; ++j) x(i, j) = rs.normal() + shift;
    }
    return x;
}

}  // namespace

TEST_CASE("run_mia behaves at both extremes") {
    attack::MiaConfig cfg;
    cfg.repeats = 3;
    cfg.seed = 4;

    SUBCASE("identical member and non-member rows give chance-level auroc") {
        Matrix rows = gaussian_rows(160, 4, 9);
        Matrix syn = gaussian_rows(40, 4, 10);
        const auto report = attack::run_mia(rows, rows, syn, cfg);
        CHECK(report.auroc.mean == doctest::Approx(0.5).epsilon(0.1));
        CHECK_FALSE(report.theoretical_bound.has_value());
    }
    SUBCASE("verbatim leak is detected with high auroc") {
        Matrix members = gaussian_rows(150, 4, 12);
        Matrix nonmembers = gaussian_rows(150, 4, 13);
        const auto report = attack::run_mia(members, nonmembers, members, cfg);
        CHECK(report.auroc.mean >= 0.9);
        CHECK(report.membership_advantage.mean > 0.5);
        CHECK(report.membership_advantage.mean <= 1.0);
    }
    SUBCASE("theoretical bound is attached when epsilon is known") {
        Matrix rows = gaussian_rows(60, 3, 2);
        Matrix syn = gaussian_rows(30, 3, 3);
        const auto report = attack::run_mia(rows, rows, syn, cfg, 2.5, 1e-5);
        REQUIRE(report.theoretical_bound.has_value());
        CHECK(*report.theoretical_bound == doctest::Approx(std::tanh(1.25) + 1e-5).epsilon(1e-12));
    }
}

TEST_CASE("attribute inference attack") {
    attack::AiaConfig cfg;
    cfg.repeats = 3;
    const std::vector<std::string> names{"a", "b", "c", "label"};

    SUBCASE("independent target is not recoverable") {
        rng::Stream rs(21);
        Matrix syn(300, 4), real(300, 4);
        for (auto* m : {&syn, &real})
            for (std::size_t i = 0; i < 300; ++i)
                for (std::size_t j = 0; j < 4; ++j) (*m)(i, j) = rs.normal();
        const auto report = attack::run_aia(syn, names, "b", real, cfg);
        CHECK(report.applicable);
        CHECK(report.r2.mean <= 0.05);
    }
    SUBCASE("duplicated column leaks completely") {
        rng::Stream rs(22);
        Matrix syn(300, 4), real(200, 4);
        for (std::size_t i = 0; i < 300; ++i) {
            for (std::size_t j = 0; j < 4; ++j) syn(i, j) = rs.normal();
            syn(i, 2) = syn(i, 0);  // c duplicates a
        }
        for (std::size_t i = 0; i < 200; ++i) {
            for (std::size_t j = 0; j < 4; ++j) real(i, j) = rs.normal();
            real(i, 2) = real(i, 0);
        }
        const auto report = attack::run_aia(syn, names, "c", real, cfg);
        CHECK(report.r2.mean >= 0.99);
    }
    SUBCASE("binary target yields thresholded accuracy near the majority rate") {
        rng::Stream rs(23);
        Matrix syn(400, 4), real(400, 4);
        for (std::size_t i = 0; i < 400; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                syn(i, j) = rs.normal();
                real(i, j) = rs.normal();
            }
            // target independent of features, prevalence 0.3
            syn(i, 3) = rs.uniform() < 0.3 ? 1.0 : 0.0;
            real(i, 3) = rs.uniform() < 0.3 ? 1.0 : 0.0;
        }
        const auto report = attack::run_aia(syn, names, "label", real, cfg);
        REQUIRE(report.accuracy.has_value());
        CHECK(report.accuracy->mean == doctest::Approx(0.7).epsilon(0.1));
    }
    SUBCASE("constant synthetic target is reported as not applicable") {
        Matrix syn(50, 4, 1.0), real(50, 4, 1.0);
        const auto report = attack::run_aia(syn, names, "b", real, cfg);
        CHECK_FALSE(report.applicable);
    }
    SUBCASE("unknown target is rejected") {
        Matrix syn(50, 4, 1.0), real(50, 4, 1.0);
        CHECK_THROWS_AS(attack::run_aia(syn, names, "nope", real, cfg), ConfigError);
    }
}
