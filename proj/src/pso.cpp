#include "betanlft/pso.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "betanlft/errors.hpp"
#include "betanlft/metrics.hpp"
#include "betanlft/numfmt.hpp"
#include "betanlft/objective.hpp"

namespace betanlft {

Position SwarmConfig::v_hi() const {
    Position v{};
    for (std::size_t d = 0; d < v.size(); ++d) v[d] = 0.2 * (x_hi[d] - x_lo[d]);
    return v;
}

Position SwarmConfig::v_lo() const {
    Position v = v_hi();
    for (double& c : v) c = -c;
    return v;
}

void validate(const SwarmConfig& cfg) {
    if (cfg.particles < 1) throw std::invalid_argument("swarm: need at least one particle");
    if (cfg.max_rounds < 1) throw std::invalid_argument("swarm: max_rounds must be >= 1");
    if (cfg.sweeps_per_round < 1) throw std::invalid_argument("swarm: sweeps_per_round must be >= 1");
    for (double c : {cfg.omega, cfg.c1, cfg.c2})
        if (!std::isfinite(c)) throw std::invalid_argument("swarm: coefficients must be finite");
    for (std::size_t d = 0; d < 3; ++d) {
        if (!std::isfinite(cfg.x_lo[d]) || !std::isfinite(cfg.x_hi[d]))
            throw std::invalid_argument("swarm: bounds must be finite");
        if (cfg.x_lo[d] > cfg.x_hi[d]) throw std::invalid_argument("swarm: lower bound above upper bound");
    }
    if (cfg.x_lo[1] < 0.0 || cfg.x_lo[2] < 0.0) throw std::invalid_argument("swarm: lambda bounds must be >= 0");
}

namespace {

double uniform01(std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

Position random_position(const SwarmConfig& cfg, std::mt19937_64& rng) {
    Position x{};
    for (std::size_t d = 0; d < x.size(); ++d) x[d] = cfg.x_lo[d] + uniform01(rng) * (cfg.x_hi[d] - cfg.x_lo[d]);
    return x;
}

}  // namespace

SwarmState init_swarm(const SwarmConfig& cfg, std::mt19937_64& rng) {
    validate(cfg);
    const Position vhi = cfg.v_hi();
    SwarmState state;
    state.particles.resize(cfg.particles);
    for (auto& p : state.particles) {
        p.x = random_position(cfg, rng);
        for (std::size_t d = 0; d < 3; ++d) p.v[d] = -vhi[d] + uniform01(rng) * 2.0 * vhi[d];
        p.pbest = p.x;
    }
    state.gbest = state.particles.front().x;
    return state;
}

void step_velocity_position(Particle& p, const Position& gbest, const SwarmConfig& cfg, double r1, double r2) {
    const Position vhi = cfg.v_hi();
    for (std::size_t d = 0; d < 3; ++d) {
        const double v = cfg.omega * p.v[d] + cfg.c1 * r1 * (p.pbest[d] - p.x[d]) + cfg.c2 * r2 * (gbest[d] - p.x[d]);
        p.v[d] = std::clamp(v, -vhi[d], vhi[d]);
        p.x[d] = std::clamp(p.x[d] + p.v[d], cfg.x_lo[d], cfg.x_hi[d]);
    }
}

void step_velocity_position(Particle& p, const Position& gbest, const SwarmConfig& cfg, std::mt19937_64& rng) {
    const double r1 = uniform01(rng);
    const double r2 = uniform01(rng);
    step_velocity_position(p, gbest, cfg, r1, r2);
}

BestUpdate update_bests(SwarmState& state, std::size_t q, double new_fit) {
    BestUpdate result;
    auto& p = state.particles.at(q);
    if (new_fit <= p.pbest_fit) {
        p.pbest = p.x;
        p.pbest_fit = new_fit;
        result.personal = true;
    }
    if (new_fit <= state.gbest_fit) {
        state.gbest = p.x;
        state.gbest_fit = new_fit;
        result.global = true;
    }
    return result;
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows) {
    out << "round,particle,beta,lambda,lambda_b,fitness,gbest_fitness\n";
    for (const auto& row : rows) {
        out << row.round << ',' << row.particle << ',' << format_double(row.x[0]) << ',' << format_double(row.x[1])
            << ',' << format_double(row.x[2]) << ',' << format_double(row.fitness) << ','
            << format_double(row.gbest_fitness) << '\n';
    }
}

SwarmResult run_swarm(const SwarmConfig& cfg, const SwarmHooks& hooks, double tol, std::size_t patience) {
    validate(cfg);
    if (!hooks.fitness) throw std::invalid_argument("swarm: fitness hook required");

    std::mt19937_64 rng(cfg.seed);
    SwarmResult result;
    result.state = init_swarm(cfg, rng);
    auto& state = result.state;
    const std::size_t q_count = state.particles.size();
    std::vector<double> fit(q_count);

    const auto evaluate = [&](std::size_t q) { fit[q] = hooks.fitness(q, state.particles[q].x); };

    double reference = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;
    std::vector<bool> quarantined(q_count);

    for (std::size_t round = 1; round <= cfg.max_rounds; ++round) {
        state.round = round;
        const std::size_t workers = std::min(cfg.threads, q_count);
        if (workers <= 1) {
            for (std::size_t q = 0; q < q_count; ++q) evaluate(q);
        } else {
            std::vector<std::exception_ptr> errors(workers);
            {
                std::vector<std::jthread> pool;
                for (std::size_t w = 0; w < workers; ++w) {
                    pool.emplace_back([&, w] {
                        try {
                            for (std::size_t q = w; q < q_count; q += workers) evaluate(q);
                        } catch (...) {
                            errors[w] = std::current_exception();
                        }
                    });
                }
            }
            for (auto& e : errors)
                if (e) std::rethrow_exception(e);
        }

        // Merge in particle-index order.
        for (std::size_t q = 0; q < q_count; ++q) {
            quarantined[q] = !std::isfinite(fit[q]);
            if (!quarantined[q]) {
                if (update_bests(state, q, fit[q]).global && hooks.on_global_best) hooks.on_global_best(q);
            }
            result.trajectory.push_back({round, q, state.particles[q].x, fit[q], state.gbest_fit});
        }
        result.gbest_history.push_back(state.gbest_fit);
        result.gbest_positions.push_back(state.gbest);
        if (hooks.on_round) hooks.on_round(state, fit);

        for (std::size_t q = 0; q < q_count; ++q) {
            auto& p = state.particles[q];
            if (quarantined[q]) {
                p.x = random_position(cfg, rng);
                p.v = Position{};
                if (hooks.on_quarantine) hooks.on_quarantine(q);
            } else {
                step_velocity_position(p, state.gbest, cfg, rng);
            }
        }

        if (patience > 0) {
            if (state.gbest_fit < reference - tol) {
                reference = state.gbest_fit;
                stale = 0;
            } else if (++stale >= patience) {
                result.stop = StopReason::Converged;
                break;
            }
        }
    }
    return result;
}

AdaptResult adapt_train(const DataSplit& data, std::size_t rank, const SwarmConfig& cfg, const TrainConfig& tcfg) {
    validate(cfg);
    validate(tcfg);
    if (data.validation.empty()) throw std::invalid_argument("adapt: validation set must be non-empty");
    const Dims dims = data.train.dims();

    const FactorModel initial = init_random(dims, rank, tcfg.seed);
    std::vector<FactorModel> models(cfg.particles, initial);
    std::vector<PredictionCache> caches(cfg.particles, refresh_cache(initial, data.train));
    std::vector<double> objectives(cfg.particles, std::numeric_limits<double>::quiet_NaN());

    AdaptResult result;
    result.model = initial;
    result.hp = tcfg.hp;
    const auto start = std::chrono::steady_clock::now();

    SwarmHooks hooks;
    hooks.fitness = [&](std::size_t q, const Position& x) {
        const HyperParams hp = to_hyper_params(x);
        try {
            for (std::size_t n = 0; n < cfg.sweeps_per_round; ++n)
                train_iteration(models[q], data.train, hp, caches[q], tcfg.epsilon_guard);
            objectives[q] = objective(models[q], data.train, hp, caches[q]);
            return fitness(models[q], data.validation);
        } catch (const DivergenceError&) {
            return std::numeric_limits<double>::infinity();
        } catch (const std::domain_error&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    bool gbest_moved = false;
    hooks.on_global_best = [&](std::size_t q) {
        result.model = models[q];
        gbest_moved = true;
    };
    hooks.on_quarantine = [&](std::size_t q) {
        models[q] = initial;
        caches[q].refresh(models[q], data.train);
    };
    hooks.on_round = [&](const SwarmState& state, std::span<const double> fit) {
        std::size_t best = 0;
        for (std::size_t q = 1; q < fit.size(); ++q)
            if (fit[q] < fit[best]) best = q;
        IterationRecord rec;
        rec.iteration = state.round;
        rec.objective = objectives[best];
        rec.val_rmse = fit[best];
        if (!tcfg.reproducible) {
            rec.elapsed_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        }
        result.report.records.push_back(rec);
        if (gbest_moved) result.report.best_iteration = state.round;
        result.report.best_val_rmse = state.gbest_fit;
        gbest_moved = false;
    };

    result.swarm = run_swarm(cfg, hooks, tcfg.tol, tcfg.patience);
    result.hp = to_hyper_params(result.swarm.state.gbest);
    result.model.trained_with = result.hp;
    result.report.stop = result.swarm.stop;
    return result;
}

}  // namespace betanlft
