#pragma once

#include <cstddef>
#include <span>

#include "betanlft/factor_model.hpp"
#include "betanlft/tensor.hpp"

namespace betanlft {

struct EvalResult {
    double mae = 0.0;
    double rmse = 0.0;
    std::size_t count = 0;
};

/// Mean absolute error. Throws std::invalid_argument on empty input or
/// length mismatch.
double mae(std::span<const double> pred, std::span<const double> truth);

/// Root mean squared error. Same preconditions as mae.
double rmse(std::span<const double> pred, std::span<const double> truth);

/// Predictions of `model` for every entry of `set`, in entry order.
std::vector<double> predictions(const FactorModel& model, const ObservedTensor& set);
std::vector<double> values(const ObservedTensor& set);

EvalResult evaluate(const FactorModel& model, const ObservedTensor& set);

/// PSO fitness: RMSE of the model over a held-out set. Same arithmetic as
/// rmse(predictions(model, set), values(set)).
double fitness(const FactorModel& model, const ObservedTensor& set);

}  // namespace betanlft
