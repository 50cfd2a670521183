#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "betanlft/factor_model.hpp"
#include "betanlft/tensor.hpp"

namespace betanlft {

inline constexpr double kDefaultEpsilonGuard = 1e-12;

struct TrainConfig {
    HyperParams hp{};
    std::size_t max_iters = 500;
    double tol = 0.0;           // minimum validation-RMSE improvement that counts
    std::size_t patience = 0;   // stop after this many non-improving rounds; 0 disables
    double epsilon_guard = kDefaultEpsilonGuard;
    std::uint64_t seed = 1;     // model initialisation seed
    bool reproducible = true;   // report elapsed_ms as 0 so reports are byte-stable
};

/// Throws std::invalid_argument on max_iters == 0, epsilon_guard <= 0 or bad hp.
void validate(const TrainConfig& cfg);

struct IterationRecord {
    std::size_t iteration = 0;  // 1-based
    double objective = 0.0;     // on the training set, after the iteration
    double val_rmse = 0.0;      // NaN when there is no validation set
    double elapsed_ms = 0.0;
};

enum class StopReason { MaxIters, Converged };

const char* stop_reason_name(StopReason r);

struct TrainReport {
    std::vector<IterationRecord> records;
    StopReason stop = StopReason::MaxIters;
    std::size_t best_iteration = 0;
    double best_val_rmse = 0.0;
};

/// `iter,objective,val_rmse,elapsed_ms`
void write_report_csv(std::ostream& out, const TrainReport& report);

/// Per-entry powers shared by every row of one group update:
///   w1 = max(yhat, eps)^(beta - 1),  w2 = y * max(yhat, eps)^(beta - 2).
struct EntryWeights {
    std::vector<double> w1;
    std::vector<double> w2;
};

EntryWeights entry_weights(const ObservedTensor& tensor, const PredictionCache& cache, double beta,
                           double epsilon_guard);

// Single parameter-group multiplicative updates. Each rescales every
// parameter of the group by
//
//   sum_{slice} w * y * yhat^(beta-2) / (sum_{slice} w * yhat^(beta-1) + reg * |slice| * x)
//
// with w the product of the other two modes' factors (1 for biases) and
// reg lambda or lambda_b. The denominator is floored at epsilon_guard.
// Rows with an empty slice are untouched. The cache is NOT refreshed here;
// the caller refreshes before the next group. A non-finite result throws
// DivergenceError before anything is written.
void update_factor_group(FactorModel& model, const ObservedTensor& train, const HyperParams& hp,
                         const PredictionCache& cache, Mode m, double epsilon_guard = kDefaultEpsilonGuard);
void update_bias_group(FactorModel& model, const ObservedTensor& train, const HyperParams& hp,
                       const PredictionCache& cache, Mode m, double epsilon_guard = kDefaultEpsilonGuard);

inline void update_group_U(FactorModel& m, const ObservedTensor& x, const HyperParams& hp,
                           const PredictionCache& c, double eps = kDefaultEpsilonGuard) {
    update_factor_group(m, x, hp, c, Mode::User, eps);
}
inline void update_group_S(FactorModel& m, const ObservedTensor& x, const HyperParams& hp,
                           const PredictionCache& c, double eps = kDefaultEpsilonGuard) {
    update_factor_group(m, x, hp, c, Mode::Service, eps);
}
inline void update_group_T(FactorModel& m, const ObservedTensor& x, const HyperParams& hp,
                           const PredictionCache& c, double eps = kDefaultEpsilonGuard) {
    update_factor_group(m, x, hp, c, Mode::Time, eps);
}
inline void update_group_a(FactorModel& m, const ObservedTensor& x, const HyperParams& hp,
                           const PredictionCache& c, double eps = kDefaultEpsilonGuard) {
    update_bias_group(m, x, hp, c, Mode::User, eps);
}
inline void update_group_b(FactorModel& m, const ObservedTensor& x, const HyperParams& hp,
                           const PredictionCache& c, double eps = kDefaultEpsilonGuard) {
    update_bias_group(m, x, hp, c, Mode::Service, eps);
}
inline void update_group_c(FactorModel& m, const ObservedTensor& x, const HyperParams& hp,
                           const PredictionCache& c, double eps = kDefaultEpsilonGuard) {
    update_bias_group(m, x, hp, c, Mode::Time, eps);
}

/// One Gauss-Seidel sweep: U, S, T, a, b, c, refreshing the cache after
/// each group. The cache must be consistent with the model on entry and is
/// consistent on exit.
void train_iteration(FactorModel& model, const ObservedTensor& train, const HyperParams& hp,
                     PredictionCache& cache, double epsilon_guard = kDefaultEpsilonGuard);

struct TrainResult {
    FactorModel model;  // best-on-validation snapshot
    TrainReport report;
};

/// Runs up to cfg.max_iters sweeps on data.train. After every sweep the
/// validation RMSE is measured; the snapshot with the lowest value (latest
/// on ties) is returned. Early stop after cfg.patience consecutive sweeps
/// that fail to improve the best validation RMSE by more than cfg.tol.
TrainResult train(FactorModel model, const DataSplit& data, const TrainConfig& cfg);

}  // namespace betanlft
