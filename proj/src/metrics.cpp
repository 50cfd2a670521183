#include "betanlft/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace betanlft {

namespace {

void check_lengths(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size()) throw std::invalid_argument("metric: prediction and truth lengths differ");
    if (pred.empty()) throw std::invalid_argument("metric: empty input");
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> truth) {
    check_lengths(pred, truth);
    double sum = 0.0;
    for (std::size_t n = 0; n < pred.size(); ++n) sum += std::abs(truth[n] - pred[n]);
    return sum / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
    check_lengths(pred, truth);
    double sum = 0.0;
    for (std::size_t n = 0; n < pred.size(); ++n) {
        const double d = truth[n] - pred[n];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(pred.size()));
}

std::vector<double> predictions(const FactorModel& model, const ObservedTensor& set) {
    if (!set.empty() && set.dims() != model.dims()) throw std::invalid_argument("model and data dims differ");
    std::vector<double> out;
    out.reserve(set.size());
    for (const auto& o : set.entries()) out.push_back(predict_unchecked(model, o.i, o.j, o.k));
    return out;
}

std::vector<double> values(const ObservedTensor& set) {
    std::vector<double> out;
    out.reserve(set.size());
    for (const auto& o : set.entries()) out.push_back(o.y);
    return out;
}

EvalResult evaluate(const FactorModel& model, const ObservedTensor& set) {
    const auto pred = predictions(model, set);
    const auto truth = values(set);
    return {mae(pred, truth), rmse(pred, truth), set.size()};
}

double fitness(const FactorModel& model, const ObservedTensor& set) {
    return rmse(predictions(model, set), values(set));
}

}  // namespace betanlft
