#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "betanlft/tensor.hpp"

namespace betanlft {

/// The triple driving one training configuration.
struct HyperParams {
    double beta = 2.0;
    double lambda = 0.0;    // factor L2 weight
    double lambda_b = 0.0;  // bias L2 weight

    friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

/// Validates lambda >= 0, lambda_b >= 0 and finite beta; throws std::invalid_argument.
void validate(const HyperParams& hp);

/// Nonnegative CP factors U (|I| x R), S (|J| x R), T (|K| x R) plus
/// per-mode bias vectors a, b, c. Factor matrices are row-major.
class FactorModel {
public:
    FactorModel() = default;

    /// All-zero model. Throws std::invalid_argument on rank < 1 or zero dims.
    FactorModel(Dims dims, std::size_t rank);

    const Dims& dims() const { return dims_; }
    std::size_t rank() const { return rank_; }

    std::span<double> row(Mode m, std::size_t idx) {
        return {factors_[static_cast<std::size_t>(m)].data() + idx * rank_, rank_};
    }
    std::span<const double> row(Mode m, std::size_t idx) const {
        return {factors_[static_cast<std::size_t>(m)].data() + idx * rank_, rank_};
    }
    std::vector<double>& factor(Mode m) { return factors_[static_cast<std::size_t>(m)]; }
    const std::vector<double>& factor(Mode m) const { return factors_[static_cast<std::size_t>(m)]; }
    std::vector<double>& bias(Mode m) { return biases_[static_cast<std::size_t>(m)]; }
    const std::vector<double>& bias(Mode m) const { return biases_[static_cast<std::size_t>(m)]; }

    double& u(std::size_t i, std::size_t r) { return row(Mode::User, i)[r]; }
    double& s(std::size_t j, std::size_t r) { return row(Mode::Service, j)[r]; }
    double& t(std::size_t k, std::size_t r) { return row(Mode::Time, k)[r]; }
    double u(std::size_t i, std::size_t r) const { return row(Mode::User, i)[r]; }
    double s(std::size_t j, std::size_t r) const { return row(Mode::Service, j)[r]; }
    double t(std::size_t k, std::size_t r) const { return row(Mode::Time, k)[r]; }
    double& a(std::size_t i) { return biases_[0][i]; }
    double& b(std::size_t j) { return biases_[1][j]; }
    double& c(std::size_t k) { return biases_[2][k]; }
    double a(std::size_t i) const { return biases_[0][i]; }
    double b(std::size_t j) const { return biases_[1][j]; }
    double c(std::size_t k) const { return biases_[2][k]; }

    /// Hyper-parameters the model was last trained with. Informational.
    HyperParams trained_with{};

    /// Smallest element over all factors and biases.
    double min_element() const;
    /// True if every element is finite and >= 0.
    bool is_valid() const;

    friend bool operator==(const FactorModel& lhs, const FactorModel& rhs) {
        return lhs.dims_ == rhs.dims_ && lhs.rank_ == rhs.rank_ && lhs.factors_ == rhs.factors_ &&
               lhs.biases_ == rhs.biases_;
    }

private:
    Dims dims_{};
    std::size_t rank_ = 0;
    std::array<std::vector<double>, 3> factors_{};
    std::array<std::vector<double>, 3> biases_{};
};

/// Biased CP reconstruction: sum_r u_ir s_jr t_kr + a_i + b_j + c_k.
/// Throws std::out_of_range on a bad index.
double predict(const FactorModel& model, std::size_t i, std::size_t j, std::size_t k);

/// Unchecked variant for hot loops.
inline double predict_unchecked(const FactorModel& model, std::size_t i, std::size_t j, std::size_t k) {
    const auto u = model.row(Mode::User, i);
    const auto s = model.row(Mode::Service, j);
    const auto t = model.row(Mode::Time, k);
    double cp = 0.0;
    for (std::size_t r = 0; r < u.size(); ++r) cp += u[r] * s[r] * t[r];
    return cp + model.a(i) + model.b(j) + model.c(k);
}

inline constexpr double kInitFactorLo = 0.01;
inline constexpr double kInitFactorHi = 0.1;
inline constexpr double kInitBiasLo = 0.0;
inline constexpr double kInitBiasHi = 0.01;

/// Factors uniform on (0.01, 0.1), biases uniform on (0, 0.01).
/// Deterministic per seed.
FactorModel init_random(Dims dims, std::size_t rank, std::uint64_t seed);

/// Per observed entry, the current reconstruction of one model.
class PredictionCache {
public:
    PredictionCache() = default;

    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t e) const { return values_[e]; }
    std::span<const double> values() const { return values_; }

    /// Recomputes every cached value. Throws std::invalid_argument when the
    /// model and tensor dims differ.
    void refresh(const FactorModel& model, const ObservedTensor& tensor);

    /// Incremental maintenance after the factor row `idx` of mode `m`
    /// changed from `old_row` to its current value in `model`.
    void apply_factor_change(const FactorModel& model, const ObservedTensor& tensor, Mode m,
                             std::size_t idx, std::span<const double> old_row);

    /// Incremental maintenance after bias `idx` of mode `m` changed by `delta`.
    void apply_bias_change(const ObservedTensor& tensor, Mode m, std::size_t idx, double delta);

private:
    std::vector<double> values_;
};

PredictionCache refresh_cache(const FactorModel& model, const ObservedTensor& tensor);

inline constexpr int kModelFormatVersion = 1;

/// Versioned JSON. Keys: format, version, dims, rank, hyper_params,
/// U, S, T (row-major), a, b, c.
std::string save_model(const FactorModel& model);
/// Throws DataError on version mismatch, truncated or malformed payload,
/// shape mismatch, or a negative or non-finite element.
FactorModel load_model(std::string_view payload);

void save_model_file(const std::filesystem::path& path, const FactorModel& model);
FactorModel load_model_file(const std::filesystem::path& path);

}  // namespace betanlft
