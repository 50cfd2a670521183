#pragma once

#include <cstddef>

#include "betanlft/factor_model.hpp"
#include "betanlft/tensor.hpp"

namespace betanlft {

/// Distance of beta from 0 or 1 under which the closed-form
/// Itakura-Saito / Kullback-Leibler branch is used.
inline constexpr double kBetaBranchTolerance = 1e-9;

enum class DivergenceBranch { ItakuraSaito, KullbackLeibler, Generic };

DivergenceBranch branch_for(double beta);

/// d_beta(y || yhat).
///   beta = 0: y/yhat - log(y/yhat) - 1
///   beta = 1: y log(y/yhat) - y + yhat   (y = 0 taken by its limit, yhat)
///   else:     (y^b + (b-1) yhat^b - b y yhat^(b-1)) / (b (b-1))
/// Throws std::domain_error for yhat <= 0, for y = 0 at beta = 0, and for
/// y = 0 with beta < 0 (the y^beta term is unbounded).
double divergence_scalar(double y, double yhat, double beta);

struct ObjectiveTerms {
    double data = 0.0;       // sum of divergences over the observed set
    double factor_l2 = 0.0;  // sum over entries of sum_r (u^2 + s^2 + t^2), unweighted
    double bias_l2 = 0.0;    // sum over entries of (a^2 + b^2 + c^2), unweighted

    double total(const HyperParams& hp) const { return data + hp.lambda * factor_l2 + hp.lambda_b * bias_l2; }
};

/// The three terms of the regularised objective, summed in entry order.
/// Regularisation is counted once per observed entry touching a parameter.
/// Throws DivergenceError if any cached reconstruction is <= 0.
ObjectiveTerms objective_terms(const FactorModel& model, const ObservedTensor& tensor, const HyperParams& hp,
                               const PredictionCache& cache);

double objective(const FactorModel& model, const ObservedTensor& tensor, const HyperParams& hp,
                 const PredictionCache& cache);

// Analytic partial derivatives of the objective. Verification only; the
// trainer never calls these.
//
//   d/du_ir = sum_{Lambda(i)} (s_jr t_kr yhat^(b-1) - s_jr t_kr y yhat^(b-2) + 2 lambda u_ir)
//   d/da_i  = sum_{Lambda(i)} (yhat^(b-1) - y yhat^(b-2) + 2 lambda_b a_i)
//
// An empty slice gives 0.
double grad_factor(const FactorModel& model, const ObservedTensor& tensor, const HyperParams& hp,
                   const PredictionCache& cache, Mode m, std::size_t idx, std::size_t r);
double grad_bias(const FactorModel& model, const ObservedTensor& tensor, const HyperParams& hp,
                 const PredictionCache& cache, Mode m, std::size_t idx);

inline double grad_u(const FactorModel& m, const ObservedTensor& x, const HyperParams& hp,
                     const PredictionCache& c, std::size_t i, std::size_t r) {
    return grad_factor(m, x, hp, c, Mode::User, i, r);
}
inline double grad_s(const FactorModel& m, const ObservedTensor& x, const HyperParams& hp,
                     const PredictionCache& c, std::size_t j, std::size_t r) {
    return grad_factor(m, x, hp, c, Mode::Service, j, r);
}
inline double grad_t(const FactorModel& m, const ObservedTensor& x, const HyperParams& hp,
                     const PredictionCache& c, std::size_t k, std::size_t r) {
    return grad_factor(m, x, hp, c, Mode::Time, k, r);
}
inline double grad_a(const FactorModel& m, const ObservedTensor& x, const HyperParams& hp,
                     const PredictionCache& c, std::size_t i) {
    return grad_bias(m, x, hp, c, Mode::User, i);
}
inline double grad_b(const FactorModel& m, const ObservedTensor& x, const HyperParams& hp,
                     const PredictionCache& c, std::size_t j) {
    return grad_bias(m, x, hp, c, Mode::Service, j);
}
inline double grad_c(const FactorModel& m, const ObservedTensor& x, const HyperParams& hp,
                     const PredictionCache& c, std::size_t k) {
    return grad_bias(m, x, hp, c, Mode::Time, k);
}

}  // namespace betanlft
