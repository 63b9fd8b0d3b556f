#include <doctest.h>

#include <cmath>

#include "tabdc/privacy.hpp"
#include "tabdc/rng.hpp"
#include "support/oracles.hpp"

using namespace tabdc;

TEST_CASE("per-example clipping") {
    SUBCASE("long rows are rescaled, direction preserved") {
        Matrix g = Matrix::from_rows({{6.0, 8.0}});  // norm 10
        auto c = privacy::clip_per_example(g, 1.0);
        CHECK(l2_norm(c.row(0), 2) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(c(0, 0) / c(0, 1) == doctest::Approx(6.0 / 8.0).epsilon(1e-12));
    }
    SUBCASE("short rows pass through untouched") {
        Matrix g = Matrix::from_rows({{0.3, 0.4}});  // norm 0.5
        auto c = privacy::clip_per_example(g, 1.0);
        CHECK(c == g);
    }
    SUBCASE("zero rows pass through") {
        Matrix g(3, 4, 0.0);
        auto c = privacy::clip_per_example(g, 1.0);
        CHECK(c == g);
    }
    SUBCASE("norm bound holds over random matrices") {
        rng::Stream rs(3);
        for (int t = 0; t < 1000; ++t) {
            Matrix g(4, 6);
            for (std::size_t i = 0; i < 4; ++i)
                for (std::size_t j = 0; j < 6; ++j) g(i, j) = rs.normal() * 5.0;
            const double c_norm = rs.uniform(0.1, 3.0);
            auto c = privacy::clip_per_example(g, c_norm);
            for (std::size_t i = 0; i < 4; ++i)
                CHECK(l2_norm(c.row(i), 6) <= c_norm * (1.0 + 1e-12));
        }
    }
    SUBCASE("per-row release influence is bounded by the clip norm") {
        rng::Stream rs(4);
        for (int t = 0; t < 200; ++t) {
            // adjacent pair: one row's gradient replaced by zero
            Matrix g(3, 5);
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = 0; j < 5; ++j) g(i, j) = rs.normal() * 3.0;
            Matrix g2 = g;
            for (std::size_t j = 0; j < 5; ++j) g2(1, j) = 0.0;
            auto c1 = privacy::clip_per_example(g, 1.0);
            auto c2 = privacy::clip_per_example(g2, 1.0);
            std::vector<double> diff(5);
            for (std::size_t j = 0; j < 5; ++j) diff[j] = c1(1, j) - c2(1, j);
            CHECK(l2_norm(diff.data(), 5) <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("adaptive sigma selection") {
    privacy::DpConfig cfg;
    cfg.sigma_base = 1.0;
    SUBCASE("full-norm row in 16 dimensions hits the floor") {
        auto sel = privacy::select_sigma({1.0}, 1.0, 16, cfg);
        CHECK(sel.per_example[0] == doctest::Approx(0.25));
        CHECK(sel.sigma_step == doctest::Approx(0.25));
    }
    SUBCASE("full-norm row in 1 dimension allows sigma 1.0") {
        auto sel = privacy::select_sigma({1.0}, 1.0, 1, cfg);
        CHECK(sel.per_example[0] == doctest::Approx(1.0));
    }
    SUBCASE("zero row gets the floor") {
        auto sel = privacy::select_sigma({0.0}, 1.0, 4, cfg);
        CHECK(sel.per_example[0] == doctest::Approx(0.25));
    }
    SUBCASE("step sigma is the per-example minimum") {
        auto sel = privacy::select_sigma({1.0, 0.0}, 1.0, 1, cfg);
        CHECK(sel.per_example[0] == doctest::Approx(1.0));
        CHECK(sel.per_example[1] == doctest::Approx(0.25));
        CHECK(sel.sigma_step == doctest::Approx(0.25));
    }
}

TEST_CASE("gradient noising") {
    SUBCASE("zero sigma is the identity") {
        Matrix g = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
        auto noised = privacy::noise_gradient(g, {0.0, 0.0}, 1.0, 7, 0);
        CHECK(noised == g);
    }
    SUBCASE("same key reproduces the noise bitwise") {
        Matrix g(2, 3, 0.5);
        auto a = privacy::noise_gradient(g, {1.0, 2.0}, 0.7, 9, 3);
        auto b = privacy::noise_gradient(g, {1.0, 2.0}, 0.7, 9, 3);
        CHECK(a == b);
        auto c = privacy::noise_gradient(g, {1.0, 2.0}, 0.7, 9, 4);
        CHECK_FALSE(a == c);
    }
    SUBCASE("empirical noise scale is sigma * C within 2 percent") {
        const std::size_t n = 100000;
        Matrix g(n, 1, 0.0);
        const double sigma = 1.3, clip = 0.8;
        auto noised = privacy::noise_gradient(g, std::vector<double>(n, sigma), clip, 123, 1);
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += noised(i, 0);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (noised(i, 0) - mean) * (noised(i, 0) - mean);
        const double sd = std::sqrt(var / static_cast<double>(n));
        CHECK(sd == doctest::Approx(sigma * clip).epsilon(0.02));
    }
}

TEST_CASE("subsampled gaussian rdp") {
    SUBCASE("q = 1 closed form") {
        for (double order : {1.5, 2.0, 8.0, 33.0, 256.0})
            for (double sigma : {0.5, 1.0, 2.0})
                CHECK(privacy::rdp_subsampled_gaussian(1.0, sigma, order) ==
                      doctest::Approx(order / (2.0 * sigma * sigma)).epsilon(1e-12));
        CHECK(privacy::rdp_subsampled_gaussian(1.0, 2.0, 8.0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("vanishing sampling rate drives the value to zero monotonically") {
        double prev = privacy::rdp_subsampled_gaussian(0.5, 1.0, 8.0);
        for (double q : {0.2, 0.05, 0.01, 0.001, 1e-5}) {
            const double cur = privacy::rdp_subsampled_gaussian(q, 1.0, 8.0);
            CHECK(cur < prev);
            prev = cur;
        }
        CHECK(prev < 1e-7);
    }
    SUBCASE("matches the extended-precision direct sum") {
        for (int alpha = 2; alpha <= 32; ++alpha) {
            const double lib = privacy::rdp_subsampled_gaussian(0.01, 1.0, alpha);
            const double oracle = static_cast<double>(testoracle::rdp_direct_sum(0.01L, 1.0L, alpha));
            CHECK(lib == doctest::Approx(oracle).epsilon(1e-9));
        }
    }
    SUBCASE("non-integer orders are bounded by the next integer") {
        const double at_half = privacy::rdp_subsampled_gaussian(0.02, 1.2, 7.5);
        const double at_eight = privacy::rdp_subsampled_gaussian(0.02, 1.2, 8.0);
        CHECK(at_half == at_eight);
    }
    SUBCASE("monotone in q, order; antitone in sigma") {
        for (double q : {0.005, 0.02, 0.1}) {
            CHECK(privacy::rdp_subsampled_gaussian(q, 1.0, 8.0) >= 0.0);
            CHECK(privacy::rdp_subsampled_gaussian(q * 1.5, 1.0, 8.0) >=
                  privacy::rdp_subsampled_gaussian(q, 1.0, 8.0));
            CHECK(privacy::rdp_subsampled_gaussian(q, 1.0, 12.0) >=
                  privacy::rdp_subsampled_gaussian(q, 1.0, 8.0));
            CHECK(privacy::rdp_subsampled_gaussian(q, 1.5, 8.0) <=
                  privacy::rdp_subsampled_gaussian(q, 1.0, 8.0));
        }
    }
    SUBCASE("input validation") {
        CHECK_THROWS(privacy::rdp_subsampled_gaussian(0.0, 1.0, 2.0));
        CHECK_THROWS(privacy::rdp_subsampled_gaussian(0.5, 1.0, 1.0));
        CHECK_THROWS(privacy::rdp_subsampled_gaussian(0.5, 0.0, 2.0));
    }
}

TEST_CASE("ledger composition") {
    SUBCASE("T identical steps scale linearly") {
        privacy::DpLedger ledger;
        for (int t = 0; t < 7; ++t) ledger.account_step(0.02, 1.0);
        const auto& cum = ledger.cumulative_rdp();
        const auto& orders = ledger.orders();
        for (std::size_t k = 0; k < orders.size(); ++k)
            CHECK(cum[k] ==
                  doctest::Approx(7.0 * privacy::rdp_subsampled_gaussian(0.02, 1.0, orders[k]))
                      .epsilon(1e-12));
        CHECK(ledger.steps_accounted() == 7);
    }
    SUBCASE("empty ledger converts to epsilon zero") {
        privacy::DpLedger ledger;
        auto report = ledger.to_epsilon_delta(1e-5);
        CHECK(report.epsilon == 0.0);
        CHECK(report.steps_accounted == 0);
    }
    SUBCASE("merging interleaved ledgers equals one combined ledger") {
        rng::Stream rs(8);
        for (int trial = 0; trial < 20; ++trial) {
            privacy::DpLedger a, b, combined;
            for (int s = 0; s < 12; ++s) {
                const double q = rs.uniform(0.001, 0.2);
                const double sigma = rs.uniform(0.3, 2.5);
                combined.account_step(q, sigma);
                (s % 2 == 0 ? a : b).account_step(q, sigma);
            }
            a.merge(b);
            const auto& ca = a.cumulative_rdp();
            const auto& cc = combined.cumulative_rdp();
            for (std::size_t k = 0; k < ca.size(); ++k)
                CHECK(ca[k] == doctest::Approx(cc[k]).epsilon(1e-12));
            CHECK(a.steps_accounted() == combined.steps_accounted());
        }
    }
    SUBCASE("serialization round trip") {
        privacy::DpLedger ledger;
        ledger.account_step(0.01, 1.5);
        ledger.account_step(0.02, 0.5);
        auto back = privacy::DpLedger::from_json(ledger.to_json());
        CHECK(back.steps_accounted() == 2);
        CHECK(back.cumulative_rdp() == ledger.cumulative_rdp());
        CHECK(back.to_epsilon_delta(1e-5).epsilon ==
              doctest::Approx(ledger.to_epsilon_delta(1e-5).epsilon).epsilon(1e-12));
    }
}

TEST_CASE("rdp to (epsilon, delta) conversion") {
    SUBCASE("single full-batch gaussian step lands at 5.30") {
        privacy::DpLedger ledger;
        ledger.account_step(1.0, 1.0);
        const auto report = ledger.to_epsilon_delta(1e-5);

        // brute-force oracle over a fine alpha grid
        double oracle = std::numeric_limits<double>::infinity();
        for (double alpha : privacy::default_rdp_orders())
            oracle = std::min(oracle, alpha / 2.0 + std::log(1e5) / (alpha - 1.0));
        CHECK(report.epsilon == doctest::Approx(oracle).epsilon(1e-12));
        CHECK(report.epsilon == doctest::Approx(5.30).epsilon(0.002));
        CHECK(report.best_order == 6.0);
    }
    SUBCASE("doubling the rdp strictly increases epsilon") {
        privacy::DpLedger once, twice;
        once.account_step(0.05, 1.0);
        twice.account_step(0.05, 1.0);
        twice.account_step(0.05, 1.0);
        CHECK(twice.to_epsilon_delta(1e-5).epsilon > once.to_epsilon_delta(1e-5).epsilon);
    }
    SUBCASE("delta = 1 collapses to the minimum rdp") {
        privacy::DpLedger ledger;
        ledger.account_step(0.1, 1.0);
        const auto report = ledger.to_epsilon_delta(1.0);
        double min_rdp = std::numeric_limits<double>::infinity();
        const auto& orders = ledger.orders();
        for (std::size_t k = 0; k < orders.size(); ++k)
            min_rdp = std::min(min_rdp, ledger.cumulative_rdp()[k]);
        CHECK(report.epsilon == doctest::Approx(min_rdp).epsilon(1e-12));
    }
    SUBCASE("truncated accounting uses only the first steps") {
        privacy::DpLedger ledger;
        for (int s = 0; s < 10; ++s) ledger.account_step(0.02, 1.0);
        privacy::DpLedger short_ledger;
        for (int s = 0; s < 4; ++s) short_ledger.account_step(0.02, 1.0);
        CHECK(ledger.to_epsilon_delta(1e-5, 4).epsilon ==
              doctest::Approx(short_ledger.to_epsilon_delta(1e-5).epsilon).epsilon(1e-12));
    }
}

TEST_CASE("desk-scale budgets land in the expected range") {
    // sampling rates and noise in the regime the accountant is used in
    for (auto [q, steps] : {std::pair{0.002, 5000}, std::pair{0.01, 2000}, std::pair{0.02, 500}}) {
        privacy::DpLedger ledger;
        for (int s = 0; s < steps; ++s) ledger.account_step(q, 1.0);
        const double eps = ledger.to_epsilon_delta(1e-5).epsilon;
        CHECK(eps >= 0.5);
        CHECK(eps <= 4.2);
    }
}

TEST_CASE("membership advantage bound") {
    CHECK(privacy::membership_advantage_bound(2.5, 1e-5) ==
          doctest::Approx(std::tanh(1.25) + 1e-5).epsilon(1e-12));
    // two-decimal-place value quoted for this setting
    CHECK(privacy::membership_advantage_bound(2.5, 1e-5) == doctest::Approx(0.84830).epsilon(1e-4));
    CHECK(privacy::membership_advantage_bound(0.0, 0.0) == 0.0);
}
