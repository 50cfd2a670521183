#include <doctest.h>

#include <cmath>
#include <sstream>

#include "betanlft/errors.hpp"
#include "betanlft/metrics.hpp"
#include "betanlft/objective.hpp"
#include "betanlft/synthetic.hpp"
#include "betanlft/trainer.hpp"
#include "oracles.hpp"

using namespace betanlft;

namespace {

FactorModel unit_model() {
    FactorModel m({1, 1, 1}, 1);
    m.u(0, 0) = m.s(0, 0) = m.t(0, 0) = 1.0;
    return m;
}

// Model and tensor where every observation equals its reconstruction.
std::pair<FactorModel, ObservedTensor> perfect_fit(std::uint64_t seed) {
    const Dims d{5, 4, 3};
    auto m = oracle::random_model(d, 2, seed, 0.2, 1.0, 0.05, 0.3);
    auto pattern = oracle::random_tensor(d, 0.6, seed + 1, 1.0, 2.0);
    std::vector<Observation> e;
    for (const auto& o : pattern.entries()) e.push_back({o.i, o.j, o.k, predict(m, o.i, o.j, o.k)});
    return {std::move(m), ObservedTensor(d, std::move(e))};
}

}  // namespace

TEST_CASE("factor update hand example") {
    auto m = unit_model();
    const ObservedTensor t({1, 1, 1}, {{0, 0, 0, 2.0}});
    auto cache = refresh_cache(m, t);
    update_group_U(m, t, {2.0, 0.0, 0.0}, cache);
    CHECK(m.u(0, 0) == 2.0);
    cache.refresh(m, t);
    CHECK(cache[0] == 2.0);
}

TEST_CASE("bias update hand example") {
    FactorModel m({1, 1, 1}, 1);
    m.a(0) = 1.0;
    const ObservedTensor t({1, 1, 1}, {{0, 0, 0, 2.0}});
    const auto cache = refresh_cache(m, t);
    update_group_a(m, t, {2.0, 0.0, 0.0}, cache);
    CHECK(m.a(0) == 2.0);
}

TEST_CASE("perfect fit is a fixed point") {
    auto [m, t] = perfect_fit(3);
    for (double beta : {0.0, 0.5, 1.0, 2.0, 3.0}) {
        auto x = m;
        auto cache = refresh_cache(x, t);
        train_iteration(x, t, {beta, 0.0, 0.0}, cache);
        CHECK(oracle::max_abs_diff(x, m) < 1e-12);
    }
}

TEST_CASE("zeros stay zero") {
    const auto t = oracle::random_tensor({4, 4, 4}, 0.6, 2, 0.5, 2.0);
    auto m = oracle::random_model({4, 4, 4}, 2, 5, 0.2, 1.0, 0.05, 0.3);
    m.u(1, 0) = 0.0;
    m.b(2) = 0.0;
    auto cache = refresh_cache(m, t);
    for (int n = 0; n < 3; ++n) train_iteration(m, t, {1.5, 0.01, 0.01}, cache);
    CHECK(m.u(1, 0) == 0.0);
    CHECK(m.b(2) == 0.0);
}

TEST_CASE("empty slice leaves the row unchanged") {
    const ObservedTensor t({2, 3, 1}, {{0, 0, 0, 1.0}, {1, 0, 0, 2.0}, {0, 2, 0, 0.5}});
    auto m = oracle::random_model({2, 3, 1}, 2, 9, 0.2, 1.0, 0.05, 0.3);
    const auto before = m;
    auto cache = refresh_cache(m, t);
    update_group_S(m, t, {1.0, 0.1, 0.1}, cache);
    CHECK(m.s(1, 0) == before.s(1, 0));
    CHECK(m.s(1, 1) == before.s(1, 1));
    cache.refresh(m, t);
    update_group_b(m, t, {1.0, 0.1, 0.1}, cache);
    CHECK(m.b(1) == before.b(1));
}

TEST_CASE("service update mirrors the user update under relabelling") {
    const Dims d{4, 5, 3};
    const auto t = oracle::random_tensor(d, 0.5, 12, 0.2, 2.0);
    const auto m = oracle::random_model(d, 2, 13, 0.2, 1.0, 0.05, 0.3);

    // Swap the user and service roles.
    std::vector<Observation> swapped;
    for (const auto& o : t.entries()) swapped.push_back({o.j, o.i, o.k, o.y});
    const ObservedTensor ts({d.services, d.users, d.slots}, swapped);
    FactorModel ms({d.services, d.users, d.slots}, 2);
    ms.factor(Mode::User) = m.factor(Mode::Service);
    ms.factor(Mode::Service) = m.factor(Mode::User);
    ms.factor(Mode::Time) = m.factor(Mode::Time);
    ms.bias(Mode::User) = m.bias(Mode::Service);
    ms.bias(Mode::Service) = m.bias(Mode::User);
    ms.bias(Mode::Time) = m.bias(Mode::Time);

    for (double beta : {0.5, 1.0, 2.0}) {
        const HyperParams hp{beta, 0.05, 0.02};
        auto a = m;
        update_group_S(a, t, hp, refresh_cache(a, t));
        auto b = ms;
        update_group_U(b, ts, hp, refresh_cache(b, ts));
        for (std::size_t n = 0; n < a.factor(Mode::Service).size(); ++n)
            CHECK(a.factor(Mode::Service)[n] == doctest::Approx(b.factor(Mode::User)[n]).epsilon(1e-14));
    }
}

TEST_CASE("beta 2 sweep matches the Euclidean rule") {
    const auto t = oracle::random_tensor({5, 4, 4}, 0.5, 21, 0.2, 2.0);
    auto m = oracle::random_model({5, 4, 4}, 3, 22, 0.1, 1.0, 0.01, 0.2);
    auto ref = m;
    auto cache = refresh_cache(m, t);
    train_iteration(m, t, {2.0, 0.02, 0.03}, cache);
    oracle::euclidean_sweep(ref, t, 0.02, 0.03);
    CHECK(oracle::max_param_diff(m, ref) < 1e-12);
}

TEST_CASE("unpenalised update moves against the gradient") {
    const auto t = oracle::random_tensor({4, 4, 3}, 0.6, 31, 0.2, 2.0);
    const auto m = oracle::random_model({4, 4, 3}, 2, 32, 0.1, 1.0, 0.05, 0.3);
    for (double beta : {0.5, 1.0, 1.5, 2.0, 2.5}) {
        const HyperParams hp{beta, 0.0, 0.0};
        auto x = m;
        const auto cache = refresh_cache(x, t);
        update_group_U(x, t, hp, cache);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t r = 0; r < 2; ++r) {
                const double g = grad_u(m, t, hp, cache, i, r);
                const double step = x.u(i, r) - m.u(i, r);
                if (std::abs(g) > 1e-9) CHECK(step * g <= 0.0);
            }
    }
}

TEST_CASE("non-finite update throws before writing") {
    FactorModel m({1, 1, 1}, 1);
    m.u(0, 0) = m.s(0, 0) = m.t(0, 0) = 1e-100;
    const ObservedTensor t({1, 1, 1}, {{0, 0, 0, 1.0}});
    const auto before = m;
    const auto cache = refresh_cache(m, t);
    // yhat = 1e-300, so y * yhat^-2 overflows.
    CHECK_THROWS_AS(update_group_U(m, t, {0.0, 0.0, 0.0}, cache, 1e-300), DivergenceError);
    CHECK(m == before);
}

TEST_CASE("training loop control") {
    const auto p = generate_synthetic({{10, 10, 6}, 2, 0.3, 0.01, 4});
    const auto data = split(p.tensor, {}, 5);
    const auto init = init_random(p.tensor.dims(), 2, 1);

    SUBCASE("one iteration gives one record") {
        TrainConfig cfg;
        cfg.hp = {2.0, 1e-4, 1e-4};
        cfg.max_iters = 1;
        const auto r = train(init, data, cfg);
        CHECK(r.report.records.size() == 1);
        CHECK(r.report.records[0].iteration == 1);
        CHECK(r.report.best_iteration == 1);
    }
    SUBCASE("zero iterations rejected") {
        TrainConfig cfg;
        cfg.max_iters = 0;
        CHECK_THROWS_AS(train(init, data, cfg), std::invalid_argument);
    }
    SUBCASE("patience stops early") {
        TrainConfig cfg;
        cfg.hp = {2.0, 1e-4, 1e-4};
        cfg.max_iters = 500;
        cfg.tol = 1.0;
        cfg.patience = 3;
        const auto r = train(init, data, cfg);
        CHECK(r.report.stop == StopReason::Converged);
        CHECK(r.report.records.size() == 4);
    }
    SUBCASE("best snapshot is returned") {
        TrainConfig cfg;
        cfg.hp = {1.5, 1e-3, 1e-3};
        cfg.max_iters = 40;
        const auto r = train(init, data, cfg);
        CHECK(r.report.records.size() == 40);
        double best = INFINITY;
        for (const auto& rec : r.report.records) best = std::min(best, rec.val_rmse);
        CHECK(r.report.best_val_rmse == best);
        CHECK(fitness(r.model, data.validation) == best);
        CHECK(r.model.is_valid());
        CHECK(r.model.trained_with == cfg.hp);
    }
    SUBCASE("report csv") {
        TrainConfig cfg;
        cfg.max_iters = 2;
        std::ostringstream csv;
        write_report_csv(csv, train(init, data, cfg).report);
        const std::string text = csv.str();
        CHECK(text.rfind("iter,objective,val_rmse,elapsed_ms\n1,", 0) == 0);
        CHECK(text.find("\n2,") != std::string::npos);
    }
}

TEST_CASE("training fits a planted instance") {
    const auto p = generate_synthetic({{12, 12, 6}, 2, 0.4, 0.0, 8});
    const auto data = split(p.tensor, {}, 9);
    TrainConfig cfg;
    cfg.hp = {2.0, 1e-4, 1e-4};
    cfg.max_iters = 300;
    const auto r = train(init_random(p.tensor.dims(), 2, 1), data, cfg);
    CHECK(evaluate(r.model, data.test).rmse < 0.05);
    CHECK(r.report.records.back().objective < r.report.records.front().objective);
}
