#include "betanlft/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "betanlft/errors.hpp"
#include "betanlft/metrics.hpp"
#include "betanlft/numfmt.hpp"
#include "betanlft/objective.hpp"

namespace betanlft {

void validate(const TrainConfig& cfg) {
    validate(cfg.hp);
    if (cfg.max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (!(cfg.epsilon_guard > 0.0)) throw std::invalid_argument("epsilon_guard must be > 0");
    if (!(cfg.tol >= 0.0)) throw std::invalid_argument("tol must be >= 0");
}

const char* stop_reason_name(StopReason r) {
    return r == StopReason::Converged ? "converged" : "max_iters";
}

void write_report_csv(std::ostream& out, const TrainReport& report) {
    out << "iter,objective,val_rmse,elapsed_ms\n";
    for (const auto& rec : report.records) {
        out << rec.iteration << ',' << format_double(rec.objective) << ',' << format_double(rec.val_rmse) << ','
            << format_double(rec.elapsed_ms) << '\n';
    }
}

EntryWeights entry_weights(const ObservedTensor& tensor, const PredictionCache& cache, double beta,
                           double epsilon_guard) {
    EntryWeights w;
    w.w1.resize(tensor.size());
    w.w2.resize(tensor.size());
    for (std::size_t e = 0; e < tensor.size(); ++e) {
        const double yhat = std::max(cache[e], epsilon_guard);
        w.w1[e] = std::pow(yhat, beta - 1.0);
        w.w2[e] = tensor[e].y * std::pow(yhat, beta - 2.0);
    }
    return w;
}

namespace {

const char* group_name(Mode m, bool bias) {
    switch (m) {
        case Mode::User: return bias ? "a" : "U";
        case Mode::Service: return bias ? "b" : "S";
        case Mode::Time: return bias ? "c" : "T";
    }
    return "?";
}

[[noreturn]] void divergence_abort(Mode m, bool bias, std::size_t idx, std::size_t r, double num, double den) {
    std::ostringstream msg;
    msg << "update of group " << group_name(m, bias) << " diverged at index " << idx;
    if (!bias) msg << ", r=" << r;
    msg << ": numerator=" << num << " denominator=" << den;
    throw DivergenceError(msg.str());
}

void check_cache(const ObservedTensor& train, const PredictionCache& cache, const FactorModel& model) {
    if (cache.size() != train.size()) throw std::invalid_argument("update: cache does not match tensor");
    if (!train.empty() && model.dims() != train.dims())
        throw std::invalid_argument("update: model and tensor dims differ");
}

}  // namespace

void update_factor_group(FactorModel& model, const ObservedTensor& train, const HyperParams& hp,
                         const PredictionCache& cache, Mode m, double epsilon_guard) {
    check_cache(train, cache, model);
    const auto w = entry_weights(train, cache, hp.beta, epsilon_guard);
    const Mode p = m == Mode::User ? Mode::Service : Mode::User;
    const Mode q = m == Mode::Time ? Mode::Service : Mode::Time;
    const std::size_t rank = model.rank();

    std::vector<double> updated(model.factor(m).size());
    std::vector<double> num(rank), den(rank);
    for (std::size_t idx = 0; idx < model.dims()[m]; ++idx) {
        const auto row = model.row(m, idx);
        const auto ids = train.slice(m, idx);
        if (ids.empty()) {
            std::copy(row.begin(), row.end(), updated.begin() + idx * rank);
            continue;
        }
        std::fill(num.begin(), num.end(), 0.0);
        std::fill(den.begin(), den.end(), 0.0);
        for (std::size_t e : ids) {
            const auto& o = train[e];
            const auto rp = model.row(p, o.index(p));
            const auto rq = model.row(q, o.index(q));
            for (std::size_t r = 0; r < rank; ++r) {
                const double other = rp[r] * rq[r];
                num[r] += other * w.w2[e];
                den[r] += other * w.w1[e];
            }
        }
        const double count = static_cast<double>(ids.size());
        for (std::size_t r = 0; r < rank; ++r) {
            const double d = std::max(den[r] + hp.lambda * count * row[r], epsilon_guard);
            const double next = row[r] * (num[r] / d);
            if (!std::isfinite(next)) divergence_abort(m, false, idx, r, num[r], d);
            updated[idx * rank + r] = next;
        }
    }
    model.factor(m) = std::move(updated);
}

void update_bias_group(FactorModel& model, const ObservedTensor& train, const HyperParams& hp,
                       const PredictionCache& cache, Mode m, double epsilon_guard) {
    check_cache(train, cache, model);
    const auto w = entry_weights(train, cache, hp.beta, epsilon_guard);
    auto updated = model.bias(m);
    for (std::size_t idx = 0; idx < updated.size(); ++idx) {
        const auto ids = train.slice(m, idx);
        if (ids.empty()) continue;
        double num = 0.0, den = 0.0;
        for (std::size_t e : ids) {
            num += w.w2[e];
            den += w.w1[e];
        }
        const double x = updated[idx];
        const double d = std::max(den + hp.lambda_b * static_cast<double>(ids.size()) * x, epsilon_guard);
        const double next = x * (num / d);
        if (!std::isfinite(next)) divergence_abort(m, true, idx, 0, num, d);
        updated[idx] = next;
    }
    model.bias(m) = std::move(updated);
}

void train_iteration(FactorModel& model, const ObservedTensor& train, const HyperParams& hp, PredictionCache& cache,
                     double epsilon_guard) {
    for (Mode m : kModes) {
        update_factor_group(model, train, hp, cache, m, epsilon_guard);
        cache.refresh(model, train);
    }
    for (Mode m : kModes) {
        update_bias_group(model, train, hp, cache, m, epsilon_guard);
        cache.refresh(model, train);
    }
}

TrainResult train(FactorModel model, const DataSplit& data, const TrainConfig& cfg) {
    validate(cfg);
    for (const ObservedTensor* part : {&data.train, &data.validation})
        if (!part->empty() && part->dims() != model.dims())
            throw std::invalid_argument("train: model and data dims differ");

    const bool has_validation = !data.validation.empty();
    const auto start = std::chrono::steady_clock::now();

    TrainResult result;
    result.model = model;
    auto& report = result.report;
    report.best_val_rmse = std::numeric_limits<double>::infinity();

    PredictionCache cache = refresh_cache(model, data.train);
    double reference = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;

    for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
        train_iteration(model, data.train, cfg.hp, cache, cfg.epsilon_guard);

        IterationRecord rec;
        rec.iteration = iter;
        rec.objective = objective(model, data.train, cfg.hp, cache);
        rec.val_rmse = has_validation ? fitness(model, data.validation) : std::numeric_limits<double>::quiet_NaN();
        if (!cfg.reproducible) {
            rec.elapsed_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        }
        report.records.push_back(rec);

        if (!has_validation || rec.val_rmse <= report.best_val_rmse) {
            result.model = model;
            report.best_iteration = iter;
            report.best_val_rmse = has_validation ? rec.val_rmse : report.best_val_rmse;
        }

        if (cfg.patience > 0 && has_validation) {
            if (report.best_val_rmse < reference - cfg.tol) {
                reference = report.best_val_rmse;
                stale = 0;
            } else if (++stale >= cfg.patience) {
                report.stop = StopReason::Converged;
                break;
            }
        }
    }
    result.model.trained_with = cfg.hp;
    return result;
}

}  // namespace betanlft
