#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tabdc/benchmark.hpp"
#include "tabdc/csv.hpp"
#include "tabdc/data.hpp"
#include "tabdc/errors.hpp"
#include "support/oracles.hpp"

using namespace tabdc;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
    const fs::path p = fs::temp_directory_path() / name;
    std::ofstream out(p);
    out << content;
    return p;
}

}  // namespace

TEST_CASE("load_csv parses a plain classification file") {
    const auto p = write_temp("basic.csv", "a,b,label\n1,2,0\n3,4,1\n5,6,0\n");
    const auto any = data::load_csv(p, "label");
    const auto& ds = std::get<data::Dataset>(any);
    CHECK(ds.n() == 3);
    CHECK(ds.d() == 2);
    CHECK(ds.feature_names == std::vector<std::string>{"a", "b"});
    CHECK(ds.features(1, 0) == 3.0);
    CHECK(ds.labels == std::vector<int>{0, 1, 0});
}

TEST_CASE("load_csv rejects a zero duration") {
    const auto p = write_temp("zerodur.csv", "a,time,event\n1,0,1\n2,3,0\n");
    CHECK_THROWS_WITH_AS(data::load_csv(p, "", std::string("time"), std::string("event")),
                         doctest::Contains("non-positive duration"), ConfigError);
}

TEST_CASE("load_csv expands categorical columns one-hot") {
    const auto p = write_temp("cat.csv", "a,categorical:site,label\n1,A,0\n2,B,1\n3,A,1\n");
    const auto any = data::load_csv(p, "label");
    const auto& ds = std::get<data::Dataset>(any);
    CHECK(ds.d() == 3);  // a + site=A + site=B
    CHECK(ds.feature_names == std::vector<std::string>{"a", "site=A", "site=B"});
    CHECK(ds.features(0, 1) == 1.0);
    CHECK(ds.features(0, 2) == 0.0);
    CHECK(ds.features(1, 2) == 1.0);
}

TEST_CASE("load_csv error paths") {
    CHECK_THROWS_AS(data::load_csv("/nonexistent/nope.csv", "label"), ConfigError);
    const auto p1 = write_temp("nocol.csv", "a,b\n1,2\n");
    CHECK_THROWS_WITH_AS(data::load_csv(p1, "label"), doctest::Contains("missing column"),
                         ConfigError);
    const auto p2 = write_temp("badcell.csv", "a,label\n1,0\nx,1\n");
    CHECK_THROWS_WITH_AS(data::load_csv(p2, "label"), doctest::Contains("row 2"), ConfigError);
    const auto p3 = write_temp("empty.csv", "");
    CHECK_THROWS_WITH_AS(data::load_csv(p3, "label"), doctest::Contains("empty"), ConfigError);
    // missing values are rejected, not imputed
    const auto p4 = write_temp("blank.csv", "a,b,label\n1,,0\n2,3,1\n");
    CHECK_THROWS_WITH_AS(data::load_csv(p4, "label"), doctest::Contains("row 1"), ConfigError);
}

TEST_CASE("save then load is the identity") {
    data::Dataset ds;
    ds.features = Matrix::from_rows({{0.1, -2.5e-7}, {3.25, 1.0 / 3.0}, {1e300, -0.0}});
    ds.labels = {0, 1, 1};
    ds.feature_names = {"u", "v"};
    const auto p = fs::temp_directory_path() / "roundtrip.csv";
    data::save_csv(p, ds);
    const auto loaded = data::load_csv(p, "label");
    const auto& back = std::get<data::Dataset>(loaded);
    CHECK(back.features == ds.features);  // bitwise via shortest round-trip formatting
    CHECK(back.labels == ds.labels);
    CHECK(back.feature_names == ds.feature_names);
}

TEST_CASE("split produces exact sizes and is deterministic") {
    data::SplitSpec spec;
    spec.seed = 1;
    spec.stratify = false;
    auto idx = data::split_indices(100, {}, spec);
    CHECK(idx.train.size() == 70);
    CHECK(idx.val.size() == 10);
    CHECK(idx.test.size() == 20);
    auto idx2 = data::split_indices(100, {}, spec);
    CHECK(idx.train == idx2.train);
    CHECK(idx.val == idx2.val);
    CHECK(idx.test == idx2.test);
}

TEST_CASE("split partitions all rows for many seeds and fractions") {
    for (std::uint64_t seed : {0ULL, 7ULL, 42ULL}) {
        for (auto [a, b] : {std::pair{0.5, 0.25}, std::pair{0.7, 0.1}, std::pair{0.34, 0.33}}) {
            data::SplitSpec spec;
            spec.train_frac = a;
            spec.val_frac = b;
            spec.test_frac = 1.0 - a - b;
            spec.seed = seed;
            spec.stratify = false;
            const std::size_t n = 57;
            auto idx = data::split_indices(n, {}, spec);
            std::vector<int> seen(n, 0);
            for (auto v : idx.train) ++seen[v];
            for (auto v : idx.val) ++seen[v];
            for (auto v : idx.test) ++seen[v];
            CHECK(std::count(seen.begin(), seen.end(), 1) == static_cast<long>(n));
        }
    }
}

TEST_CASE("stratified split preserves class balance within one sample") {
    std::vector<int> labels(100, 0);
    for (int i = 0; i < 10; ++i) labels[static_cast<std::size_t>(i)] = 1;
    data::SplitSpec spec;
    spec.seed = 3;
    spec.stratify = true;
    auto idx = data::split_indices(100, labels, spec);
    auto count_pos = [&](const std::vector<std::size_t>& part) {
        long c = 0;
        for (auto i : part)
            if (labels[i] == 1) ++c;
        return c;
    };
    CHECK(count_pos(idx.test) >= 1);
    CHECK(count_pos(idx.test) <= 3);  // 2 +- 1
    CHECK(count_pos(idx.train) >= 6);
    CHECK(count_pos(idx.train) <= 8);
    CHECK(idx.train.size() + idx.val.size() + idx.test.size() == 100);
}

TEST_CASE("split rejects settings that empty a part") {
    data::SplitSpec spec;
    spec.train_frac = 0.98;
    spec.val_frac = 0.01;
    spec.test_frac = 0.01;
    spec.stratify = false;
    CHECK_THROWS_AS(data::split_indices(20, {}, spec), ConfigError);
}

TEST_CASE("survival time scaling follows the robust rule") {
    SUBCASE("IQR branch") {
        const std::vector<double> times{1, 2, 3, 4, 5};
        const std::vector<int> events{1, 1, 1, 1, 1};
        auto [scaled, scaler] = data::scale_survival_times(times, events);
        CHECK(scaler.scale_s == doctest::Approx(2.0).epsilon(1e-12));  // type-7 Q3-Q1 = 4-2
        CHECK(scaled == std::vector<double>{0.5, 1.0, 1.5, 2.0, 2.5});
    }
    SUBCASE("median fallback when IQR is zero") {
        const std::vector<double> times{5, 5, 5, 9};
        const std::vector<int> events{1, 1, 1, 0};
        auto [scaled, scaler] = data::scale_survival_times(times, events);
        CHECK(scaler.scale_s == doctest::Approx(5.0));
        CHECK(scaled[0] == doctest::Approx(1.0));
    }
    SUBCASE("censored rows share the divisor") {
        const std::vector<double> times{1, 2, 3, 4, 5, 10};
        const std::vector<int> events{1, 1, 1, 1, 1, 0};
        auto [scaled, scaler] = data::scale_survival_times(times, events);
        CHECK(scaled[5] == doctest::Approx(5.0));  // 10 / 2
    }
    SUBCASE("no events is an error") {
        CHECK_THROWS_AS(data::scale_survival_times({1, 2}, {0, 0}), ConfigError);
    }
    SUBCASE("scaling preserves order") {
        const std::vector<double> times{3.5, 0.2, 7.0, 1.1, 2.2, 9.9};
        const std::vector<int> events{1, 0, 1, 1, 0, 1};
        auto [scaled, scaler] = data::scale_survival_times(times, events);
        for (std::size_t i = 0; i < times.size(); ++i)
            for (std::size_t j = 0; j < times.size(); ++j)
                CHECK((times[i] < times[j]) == (scaled[i] < scaled[j]));
    }
}

TEST_CASE("feature scaler standardizes and inverts") {
    Matrix x = Matrix::from_rows({{2, 7, 0.5}, {4, 7, -1.5}, {3, 7, 2.0}, {1, 7, 0.25}});
    auto scaler = data::fit_feature_scaler(x);
    Matrix z = scaler.transform(x);

    SUBCASE("two-point column maps to +-1") {
        Matrix two = Matrix::from_rows({{2}, {4}});
        auto sc2 = data::fit_feature_scaler(two);
        Matrix z2 = sc2.transform(two);
        CHECK(z2(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(z2(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("constant column maps to zero") {
        for (std::size_t i = 0; i < 4; ++i) CHECK(z(i, 1) == 0.0);
    }
    SUBCASE("train columns end up standardized") {
        for (std::size_t j : {0UL, 2UL}) {
            double mean = 0.0, var = 0.0;
            for (std::size_t i = 0; i < 4; ++i) mean += z(i, j);
            mean /= 4.0;
            for (std::size_t i = 0; i < 4; ++i) var += (z(i, j) - mean) * (z(i, j) - mean);
            CHECK(std::abs(mean) < 1e-10);
            CHECK(std::abs(std::sqrt(var / 4.0) - 1.0) < 1e-8);
        }
    }
    SUBCASE("round trip within 1e-10") {
        Matrix back = scaler.inverse(z);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                CHECK(back(i, j) == doctest::Approx(x(i, j)).epsilon(1e-10));
    }
}

TEST_CASE("two_gaussians benchmark has the advertised difficulty") {
    SUBCASE("delta 0 is indistinguishable") {
        data::BenchmarkParams params;
        params.delta = 0.0;
        auto ds = data::generate_two_gaussians(4000, 6, 11, params);
        // score along the would-be discriminative direction
        std::vector<double> score(ds.n());
        for (std::size_t i = 0; i < ds.n(); ++i)
            for (std::size_t j = 0; j < 3; ++j) score[i] += ds.features(i, j);
        CHECK(testoracle::auroc_pairs(score, ds.labels) == doctest::Approx(0.5).epsilon(0.05));
    }
    SUBCASE("delta 3 supports AUROC >= 0.95 for the generative rule") {
        data::BenchmarkParams params;
        params.delta = 3.0;
        auto ds = data::generate_two_gaussians(5000, 10, 12, params);
        std::vector<double> score(ds.n());
        for (std::size_t i = 0; i < ds.n(); ++i)
            for (std::size_t j = 0; j < 5; ++j) score[i] += ds.features(i, j);
        CHECK(testoracle::auroc_pairs(score, ds.labels) >= 0.95);
    }
    SUBCASE("labels are balanced") {
        auto ds = data::generate_two_gaussians(500, 4, 1, {});
        CHECK(std::count(ds.labels.begin(), ds.labels.end(), 1) == 250);
    }
}

TEST_CASE("weibull benchmark censoring") {
    data::BenchmarkParams params;
    params.censor_frac = 0.0;
    auto ds = data::generate_weibull_survival(300, 5, 2, params);
    CHECK(ds.n_events() == 300);

    params.censor_frac = 0.4;
    auto ds2 = data::generate_weibull_survival(4000, 5, 2, params);
    const double frac =
        1.0 - static_cast<double>(ds2.n_events()) / static_cast<double>(ds2.n());
    CHECK(frac == doctest::Approx(0.4).epsilon(0.1));

    params.censor_frac = 0.95;
    CHECK_THROWS_AS(data::generate_weibull_survival(300, 5, 2, params), ConfigError);
    CHECK_THROWS_AS(data::generate_benchmark("nope", 300, 5, 2, {}), ConfigError);
}
