#include "betanlft/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace betanlft {

PlantedInstance generate_synthetic(const SyntheticSpec& spec) {
    if (spec.rank < 1) throw std::invalid_argument("synthetic: rank must be >= 1");
    if (spec.dims.any_zero()) throw std::invalid_argument("synthetic: dims must be positive");
    if (!(spec.density > 0.0 && spec.density <= 1.0)) throw std::invalid_argument("synthetic: density must be in (0, 1]");
    if (!(spec.noise_sigma >= 0.0)) throw std::invalid_argument("synthetic: noise_sigma must be >= 0");

    const std::uint64_t total = spec.dims.dense_size();
    const auto count = static_cast<std::uint64_t>(std::llround(spec.density * static_cast<double>(total)));
    if (count < 1) throw std::invalid_argument("synthetic: density * |I||J||K| must be >= 1");

    std::mt19937_64 rng(spec.seed);

    FactorModel truth(spec.dims, spec.rank);
    std::uniform_real_distribution<double> factor(std::nextafter(0.0, 1.0), 1.0);
    std::uniform_real_distribution<double> bias(std::nextafter(0.0, 1.0), 0.1);
    for (Mode m : kModes)
        for (double& v : truth.factor(m)) v = factor(rng);
    for (Mode m : kModes)
        for (double& v : truth.bias(m)) v = bias(rng);

    // Floyd's sampling of `count` distinct linear indices out of `total`.
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(count);
    for (std::uint64_t n = total - count; n < total; ++n) {
        const std::uint64_t pick = std::uniform_int_distribution<std::uint64_t>(0, n)(rng);
        if (!chosen.insert(pick).second) chosen.insert(n);
    }
    std::vector<std::uint64_t> keys(chosen.begin(), chosen.end());
    std::sort(keys.begin(), keys.end());

    std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);
    const auto& d = spec.dims;
    std::vector<Observation> entries;
    entries.reserve(keys.size());
    for (std::uint64_t key : keys) {
        Observation o;
        o.k = key % d.slots;
        o.j = (key / d.slots) % d.services;
        o.i = key / d.slots / d.services;
        o.y = predict_unchecked(truth, o.i, o.j, o.k);
        if (spec.noise_sigma > 0.0) o.y = std::max(0.0, o.y + noise(rng));
        entries.push_back(o);
    }
    return {ObservedTensor(spec.dims, std::move(entries)), std::move(truth)};
}

}  // namespace betanlft
