#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "betanlft/factor_model.hpp"
#include "betanlft/tensor.hpp"
#include "betanlft/trainer.hpp"

namespace betanlft {

/// A point in hyper-parameter space: [beta, lambda, lambda_b].
using Position = std::array<double, 3>;

inline HyperParams to_hyper_params(const Position& x) { return {x[0], x[1], x[2]}; }

struct SwarmConfig {
    std::size_t particles = 20;  // Q
    double omega = 0.726;
    double c1 = 2.0;
    double c2 = 2.0;
    Position x_lo{0.0, 1e-4, 1e-4};
    Position x_hi{3.0, 1e-1, 1e-1};
    std::size_t max_rounds = 200;
    std::uint64_t seed = 1;
    std::size_t threads = 1;     // particle evaluations per round run concurrently when > 1
    std::size_t sweeps_per_round = 1;  // adapt_train: trainer sweeps per particle per round

    /// 0.2 * (x_hi - x_lo).
    Position v_hi() const;
    /// -v_hi().
    Position v_lo() const;
};

/// Throws std::invalid_argument on Q == 0, max_rounds == 0, x_lo > x_hi, a
/// negative lambda bound or non-finite coefficients. x_lo == x_hi on a
/// coordinate is allowed and pins it.
void validate(const SwarmConfig& cfg);

struct Particle {
    Position x{};
    Position v{};
    Position pbest{};
    double pbest_fit = std::numeric_limits<double>::infinity();
};

struct SwarmState {
    std::vector<Particle> particles;
    Position gbest{};
    double gbest_fit = std::numeric_limits<double>::infinity();
    std::size_t round = 0;
};

/// Positions uniform within bounds, velocities uniform within velocity bounds.
SwarmState init_swarm(const SwarmConfig& cfg, std::mt19937_64& rng);

/// v <- omega v + c1 r1 (pbest - x) + c2 r2 (gbest - x), clamped to
/// [v_lo, v_hi]; then x <- x + v, clamped to [x_lo, x_hi]. r1 and r2 are
/// shared by the three coordinates.
void step_velocity_position(Particle& p, const Position& gbest, const SwarmConfig& cfg, double r1, double r2);

/// Draws r1 then r2 uniform on [0, 1) and steps.
void step_velocity_position(Particle& p, const Position& gbest, const SwarmConfig& cfg, std::mt19937_64& rng);

struct BestUpdate {
    bool personal = false;
    bool global = false;
};

/// pbest moves to the current position iff new_fit <= pbest_fit; gbest
/// iff new_fit <= gbest_fit.
BestUpdate update_bests(SwarmState& state, std::size_t q, double new_fit);

struct TrajectoryRow {
    std::size_t round = 0;  // 1-based
    std::size_t particle = 0;
    Position x{};
    double fitness = 0.0;
    double gbest_fitness = 0.0;  // after this particle's bests update
};

/// `round,particle,beta,lambda,lambda_b,fitness,gbest_fitness`
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows);

struct SwarmHooks {
    /// Fitness of particle q at position x. Called once per particle per
    /// round, possibly concurrently for different q. A non-finite return
    /// quarantines the particle.
    std::function<double(std::size_t q, const Position& x)> fitness;
    /// Called (sequentially) when particle q becomes the group best.
    std::function<void(std::size_t q)> on_global_best;
    /// Called (sequentially) after particle q is quarantined and re-placed.
    std::function<void(std::size_t q)> on_quarantine;
    /// Called once per round after bests are merged, before positions move.
    std::function<void(const SwarmState& state, std::span<const double> round_fitness)> on_round;
};

struct SwarmResult {
    SwarmState state;
    std::vector<double> gbest_history;  // gbest_fit after each round
    std::vector<Position> gbest_positions;
    std::vector<TrajectoryRow> trajectory;
    StopReason stop = StopReason::MaxIters;
};

/// Generic PSO loop. Per round: evaluate every particle, merge bests in
/// particle-index order, then move every non-quarantined particle. Stops
/// after cfg.max_rounds, or after `patience` (> 0) consecutive rounds in
/// which gbest_fit did not drop by more than `tol`.
SwarmResult run_swarm(const SwarmConfig& cfg, const SwarmHooks& hooks, double tol = 0.0,
                      std::size_t patience = 0);

struct AdaptResult {
    FactorModel model;     // gbest particle's snapshot at its best round
    HyperParams hp;        // gbest position
    TrainReport report;    // per round: round-best particle's objective and fitness
    SwarmResult swarm;
};

/// Self-adapting training: each particle owns a model initialised from
/// tcfg.seed and gets one U,S,T,a,b,c sweep per round with its own
/// position as (beta, lambda, lambda_b). Fitness is validation RMSE.
/// A particle whose sweep diverges is quarantined: fitness +inf, position
/// re-drawn within bounds, velocity zeroed, model re-initialised.
/// Termination uses cfg.max_rounds with tcfg.tol and tcfg.patience.
AdaptResult adapt_train(const DataSplit& data, std::size_t rank, const SwarmConfig& cfg, const TrainConfig& tcfg);

}  // namespace betanlft
