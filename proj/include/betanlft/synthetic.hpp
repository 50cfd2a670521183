#pragma once

#include <cstdint>

#include "betanlft/factor_model.hpp"
#include "betanlft/tensor.hpp"

namespace betanlft {

struct SyntheticSpec {
    Dims dims{20, 20, 8};
    std::size_t rank = 3;
    double density = 0.2;
    double noise_sigma = 0.01;
    std::uint64_t seed = 1;
};

struct PlantedInstance {
    ObservedTensor tensor;
    FactorModel truth;
};

/// Planted-factor tensor. Ground-truth factors are uniform on (0, 1) and
/// biases uniform on (0, 0.1). round(density * |I||J||K|) distinct triples
/// are sampled without replacement and y = max(0, yhat_truth + N(0, sigma)).
PlantedInstance generate_synthetic(const SyntheticSpec& spec);

}  // namespace betanlft
