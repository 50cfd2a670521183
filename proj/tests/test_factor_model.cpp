#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

#include "betanlft/errors.hpp"
#include "betanlft/factor_model.hpp"
#include "betanlft/synthetic.hpp"
#include "oracles.hpp"

using namespace betanlft;

TEST_CASE("predict") {
    SUBCASE("zero model") {
        const FactorModel m({1, 1, 1}, 1);
        CHECK(predict(m, 0, 0, 0) == 0.0);
    }
    SUBCASE("hand example") {
        FactorModel m({1, 1, 1}, 2);
        m.u(0, 0) = 1, m.u(0, 1) = 2;
        m.s(0, 0) = 3, m.s(0, 1) = 1;
        m.t(0, 0) = 1, m.t(0, 1) = 1;
        m.a(0) = 0.5, m.b(0) = 0.25, m.c(0) = 0.25;
        CHECK(predict(m, 0, 0, 0) == 6.0);
    }
    SUBCASE("out of range") {
        const FactorModel m({2, 2, 2}, 1);
        CHECK_THROWS_AS(predict(m, 2, 0, 0), std::out_of_range);
    }
}

TEST_CASE("predict is a sum of rank-one terms plus biases") {
    const auto m = oracle::random_model({3, 4, 2}, 3, 11, 0.1, 1.0, 0.0, 0.5);
    for (std::size_t r = 0; r < 3; ++r) {
        FactorModel single({3, 4, 2}, 1);
        single.u(1, 0) = m.u(1, r);
        single.s(2, 0) = m.s(2, r);
        single.t(1, 0) = m.t(1, r);
        CHECK(predict(single, 1, 2, 1) == m.u(1, r) * m.s(2, r) * m.t(1, r));
    }
    double expect = m.a(1) + m.b(2) + m.c(1);
    for (std::size_t r = 0; r < 3; ++r) expect += m.u(1, r) * m.s(2, r) * m.t(1, r);
    CHECK(predict(m, 1, 2, 1) == doctest::Approx(expect).epsilon(1e-15));

    // Linear in each factor row.
    auto scaled = m;
    for (std::size_t r = 0; r < 3; ++r) scaled.u(1, r) *= 2.0;
    const double bias = m.a(1) + m.b(2) + m.c(1);
    CHECK(predict(scaled, 1, 2, 1) - bias == doctest::Approx(2.0 * (predict(m, 1, 2, 1) - bias)));
}

TEST_CASE("noiseless planted model reproduces its data") {
    const auto p = generate_synthetic({{8, 7, 5}, 2, 0.3, 0.0, 2});
    for (const auto& o : p.tensor.entries()) CHECK(predict(p.truth, o.i, o.j, o.k) == o.y);
}

TEST_CASE("init_random ranges and determinism") {
    const auto m = init_random({5, 5, 5}, 2, 7);
    for (Mode mode : kModes) {
        CHECK(m.factor(mode).size() == 10);
        for (double x : m.factor(mode)) {
            CHECK(x > kInitFactorLo);
            CHECK(x < kInitFactorHi);
        }
        for (double x : m.bias(mode)) {
            CHECK(x > 0.0);
            CHECK(x < kInitBiasHi);
        }
    }
    CHECK(m.min_element() > 0.0);
    CHECK(m == init_random({5, 5, 5}, 2, 7));
    CHECK_FALSE(m == init_random({5, 5, 5}, 2, 8));
    CHECK_THROWS_AS(init_random({5, 0, 5}, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(init_random({5, 5, 5}, 0, 1), std::invalid_argument);
}

TEST_CASE("prediction cache") {
    SUBCASE("zero model gives zeros") {
        const auto t = oracle::random_tensor({4, 4, 4}, 0.5, 1, 0.1, 1.0);
        const FactorModel m({4, 4, 4}, 2);
        const auto c = refresh_cache(m, t);
        CHECK(c.size() == t.size());
        for (double v : c.values()) CHECK(v == 0.0);
    }
    SUBCASE("empty tensor gives empty cache") {
        const ObservedTensor t({3, 3, 3}, {});
        CHECK(refresh_cache(init_random({3, 3, 3}, 1, 1), t).size() == 0);
    }
    SUBCASE("incremental maintenance matches refresh") {
        const auto t = oracle::random_tensor({6, 5, 4}, 0.5, 2, 0.1, 1.0);
        auto m = oracle::random_model({6, 5, 4}, 3, 3, 0.1, 1.0, 0.0, 0.3);
        auto cache = refresh_cache(m, t);
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> unif(0.0, 2.0);
        for (int step = 0; step < 50; ++step) {
            const Mode mode = kModes[static_cast<std::size_t>(step) % 3];
            const std::size_t idx = static_cast<std::size_t>(step) % m.dims()[mode];
            if (step % 2 == 0) {
                const std::vector<double> old(m.row(mode, idx).begin(), m.row(mode, idx).end());
                for (double& x : m.row(mode, idx)) x = unif(rng);
                cache.apply_factor_change(m, t, mode, idx, old);
            } else {
                const double delta = unif(rng) - m.bias(mode)[idx] * 0.5;
                m.bias(mode)[idx] += delta;
                cache.apply_bias_change(t, mode, idx, delta);
            }
        }
        const auto fresh = refresh_cache(m, t);
        for (std::size_t e = 0; e < t.size(); ++e) CHECK(cache[e] == doctest::Approx(fresh[e]).epsilon(1e-10));
    }
}

TEST_CASE("model serialisation") {
    auto m = oracle::random_model({4, 3, 2}, 2, 6, 0.01, 3.0, 0.0, 1.0);
    m.trained_with = {1.5, 0.01, 0.002};

    SUBCASE("round trip is exact") {
        const auto back = load_model(save_model(m));
        CHECK(back == m);
        CHECK(back.trained_with == m.trained_with);
    }
    SUBCASE("negative element is rejected") {
        auto bad = m;
        bad.u(0, 0) = -0.5;
        CHECK_THROWS_WITH_AS(load_model(save_model(bad)), doctest::Contains("negative"), DataError);
    }
    SUBCASE("rank mismatch is rejected") {
        std::string text = save_model(m);
        const auto pos = text.find("\"rank\":2");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 8, "\"rank\":3");
        CHECK_THROWS_AS(load_model(text), DataError);
    }
    SUBCASE("truncated payload is rejected") {
        const std::string text = save_model(m);
        CHECK_THROWS_AS(load_model(text.substr(0, text.size() / 2)), DataError);
    }
    SUBCASE("unknown version is rejected") {
        std::string text = save_model(m);
        const auto pos = text.find("\"version\":1");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 11, "\"version\":9");
        CHECK_THROWS_AS(load_model(text), DataError);
    }
}
