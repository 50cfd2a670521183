#include "betanlft/objective.hpp"

#include <cmath>
#include <stdexcept>

#include "betanlft/errors.hpp"

namespace betanlft {

DivergenceBranch branch_for(double beta) {
    if (std::abs(beta) <= kBetaBranchTolerance) return DivergenceBranch::ItakuraSaito;
    if (std::abs(beta - 1.0) <= kBetaBranchTolerance) return DivergenceBranch::KullbackLeibler;
    return DivergenceBranch::Generic;
}

double divergence_scalar(double y, double yhat, double beta) {
    if (!(yhat > 0.0)) throw std::domain_error("divergence: yhat must be > 0");
    if (y < 0.0) throw std::domain_error("divergence: y must be >= 0");
    switch (branch_for(beta)) {
        case DivergenceBranch::ItakuraSaito: {
            if (y == 0.0) throw std::domain_error("divergence: y = 0 is undefined at beta = 0");
            const double ratio = y / yhat;
            return ratio - std::log(ratio) - 1.0;
        }
        case DivergenceBranch::KullbackLeibler:
            if (y == 0.0) return yhat;
            return y * std::log(y / yhat) - y + yhat;
        case DivergenceBranch::Generic:
            break;
    }
    if (y == 0.0 && beta < 0.0) throw std::domain_error("divergence: y = 0 is unbounded for beta < 0");
    const double y_b = std::pow(y, beta);
    const double yhat_b1 = std::pow(yhat, beta - 1.0);
    const double yhat_b = yhat_b1 * yhat;
    return (y_b + (beta - 1.0) * yhat_b - beta * y * yhat_b1) / (beta * (beta - 1.0));
}

ObjectiveTerms objective_terms(const FactorModel& model, const ObservedTensor& tensor, const HyperParams& hp,
                               const PredictionCache& cache) {
    if (cache.size() != tensor.size()) throw std::invalid_argument("objective: cache does not match tensor");
    ObjectiveTerms terms;
    for (std::size_t e = 0; e < tensor.size(); ++e) {
        const auto& o = tensor[e];
        const double yhat = cache[e];
        if (!(yhat > 0.0)) throw DivergenceError("objective: non-positive reconstruction; model collapsed");
        terms.data += divergence_scalar(o.y, yhat, hp.beta);

        const auto u = model.row(Mode::User, o.i);
        const auto s = model.row(Mode::Service, o.j);
        const auto t = model.row(Mode::Time, o.k);
        double sq = 0.0;
        for (std::size_t r = 0; r < model.rank(); ++r) sq += u[r] * u[r] + s[r] * s[r] + t[r] * t[r];
        terms.factor_l2 += sq;
        terms.bias_l2 += model.a(o.i) * model.a(o.i) + model.b(o.j) * model.b(o.j) + model.c(o.k) * model.c(o.k);
    }
    return terms;
}

double objective(const FactorModel& model, const ObservedTensor& tensor, const HyperParams& hp,
                 const PredictionCache& cache) {
    return objective_terms(model, tensor, hp, cache).total(hp);
}

namespace {

// d(divergence)/d(yhat) = yhat^(beta-1) - y yhat^(beta-2), for every branch.
double data_slope(double y, double yhat, double beta) {
    if (!(yhat > 0.0)) throw DivergenceError("gradient: non-positive reconstruction");
    return std::pow(yhat, beta - 1.0) - y * std::pow(yhat, beta - 2.0);
}

}  // namespace

double grad_factor(const FactorModel& model, const ObservedTensor& tensor, const HyperParams& hp,
                   const PredictionCache& cache, Mode m, std::size_t idx, std::size_t r) {
    const Mode p = m == Mode::User ? Mode::Service : Mode::User;
    const Mode q = m == Mode::Time ? Mode::Service : Mode::Time;
    const double x = model.row(m, idx)[r];
    double g = 0.0;
    for (std::size_t e : tensor.slice(m, idx)) {
        const auto& o = tensor[e];
        const double w = model.row(p, o.index(p))[r] * model.row(q, o.index(q))[r];
        g += w * data_slope(o.y, cache[e], hp.beta) + 2.0 * hp.lambda * x;
    }
    return g;
}

double grad_bias(const FactorModel& model, const ObservedTensor& tensor, const HyperParams& hp,
                 const PredictionCache& cache, Mode m, std::size_t idx) {
    const double x = model.bias(m)[idx];
    double g = 0.0;
    for (std::size_t e : tensor.slice(m, idx)) g += data_slope(tensor[e].y, cache[e], hp.beta) + 2.0 * hp.lambda_b * x;
    return g;
}

}  // namespace betanlft
