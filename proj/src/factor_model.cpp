#include "betanlft/factor_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "betanlft/errors.hpp"

namespace betanlft {

void validate(const HyperParams& hp) {
    if (!std::isfinite(hp.beta)) throw std::invalid_argument("beta must be finite");
    if (!(hp.lambda >= 0.0) || !std::isfinite(hp.lambda)) throw std::invalid_argument("lambda must be >= 0");
    if (!(hp.lambda_b >= 0.0) || !std::isfinite(hp.lambda_b)) throw std::invalid_argument("lambda_b must be >= 0");
}

FactorModel::FactorModel(Dims dims, std::size_t rank) : dims_(dims), rank_(rank) {
    if (rank < 1) throw std::invalid_argument("rank must be >= 1");
    if (dims.any_zero()) throw std::invalid_argument("model dims must be positive");
    for (Mode m : kModes) {
        factors_[static_cast<std::size_t>(m)].assign(dims[m] * rank, 0.0);
        biases_[static_cast<std::size_t>(m)].assign(dims[m], 0.0);
    }
}

double FactorModel::min_element() const {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < 3; ++m) {
        for (double v : factors_[m]) lo = std::min(lo, v);
        for (double v : biases_[m]) lo = std::min(lo, v);
    }
    return lo;
}

bool FactorModel::is_valid() const {
    const auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
    for (std::size_t m = 0; m < 3; ++m) {
        if (!std::all_of(factors_[m].begin(), factors_[m].end(), ok)) return false;
        if (!std::all_of(biases_[m].begin(), biases_[m].end(), ok)) return false;
    }
    return true;
}

double predict(const FactorModel& model, std::size_t i, std::size_t j, std::size_t k) {
    const auto& d = model.dims();
    if (i >= d.users || j >= d.services || k >= d.slots) throw std::out_of_range("predict: index out of range");
    return predict_unchecked(model, i, j, k);
}

FactorModel init_random(Dims dims, std::size_t rank, std::uint64_t seed) {
    FactorModel model(dims, rank);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> factor(kInitFactorLo, kInitFactorHi);
    // Open at zero: a zero bias could never move under multiplicative updates.
    std::uniform_real_distribution<double> bias(std::nextafter(kInitBiasLo, 1.0), kInitBiasHi);
    for (Mode m : kModes)
        for (double& v : model.factor(m)) v = factor(rng);
    for (Mode m : kModes)
        for (double& v : model.bias(m)) v = bias(rng);
    return model;
}

void PredictionCache::refresh(const FactorModel& model, const ObservedTensor& tensor) {
    if (!tensor.empty() && model.dims() != tensor.dims())
        throw std::invalid_argument("refresh_cache: model and tensor dims differ");
    values_.resize(tensor.size());
    for (std::size_t e = 0; e < tensor.size(); ++e) {
        const auto& o = tensor[e];
        values_[e] = predict_unchecked(model, o.i, o.j, o.k);
    }
}

void PredictionCache::apply_factor_change(const FactorModel& model, const ObservedTensor& tensor, Mode m,
                                          std::size_t idx, std::span<const double> old_row) {
    const auto new_row = model.row(m, idx);
    // The other two modes, in fixed order.
    const Mode p = m == Mode::User ? Mode::Service : Mode::User;
    const Mode q = m == Mode::Time ? Mode::Service : Mode::Time;
    for (std::size_t e : tensor.slice(m, idx)) {
        const auto& o = tensor[e];
        const auto rp = model.row(p, o.index(p));
        const auto rq = model.row(q, o.index(q));
        double delta = 0.0;
        for (std::size_t r = 0; r < model.rank(); ++r) delta += (new_row[r] - old_row[r]) * rp[r] * rq[r];
        values_[e] += delta;
    }
}

void PredictionCache::apply_bias_change(const ObservedTensor& tensor, Mode m, std::size_t idx, double delta) {
    for (std::size_t e : tensor.slice(m, idx)) values_[e] += delta;
}

PredictionCache refresh_cache(const FactorModel& model, const ObservedTensor& tensor) {
    PredictionCache cache;
    cache.refresh(model, tensor);
    return cache;
}

namespace {

constexpr const char* kFormatTag = "betanlft-model";
constexpr std::array<const char*, 3> kFactorKeys{"U", "S", "T"};
constexpr std::array<const char*, 3> kBiasKeys{"a", "b", "c"};

void read_array(const nlohmann::json& body, const char* key, std::vector<double>& out) {
    if (!body.contains(key) || !body[key].is_array()) throw DataError(std::string("model: missing array ") + key);
    const auto& arr = body[key];
    if (arr.size() != out.size()) {
        std::ostringstream msg;
        msg << "model: array " << key << " has " << arr.size() << " elements, header implies " << out.size();
        throw DataError(msg.str());
    }
    for (std::size_t n = 0; n < out.size(); ++n) {
        if (!arr[n].is_number()) throw DataError(std::string("model: non-numeric element in ") + key);
        const double v = arr[n].get<double>();
        if (!std::isfinite(v)) throw DataError(std::string("model: non-finite element in ") + key);
        if (v < 0.0) {
            std::ostringstream msg;
            msg << "model: element " << n << " of " << key << " is negative; factors and biases must be nonnegative";
            throw DataError(msg.str());
        }
        out[n] = v;
    }
}

}  // namespace

std::string save_model(const FactorModel& model) {
    nlohmann::ordered_json j;
    const auto& d = model.dims();
    j["format"] = kFormatTag;
    j["version"] = kModelFormatVersion;
    j["dims"] = {d.users, d.services, d.slots};
    j["rank"] = model.rank();
    j["hyper_params"] = {{"beta", model.trained_with.beta},
                         {"lambda", model.trained_with.lambda},
                         {"lambda_b", model.trained_with.lambda_b}};
    for (Mode m : kModes) j[kFactorKeys[static_cast<std::size_t>(m)]] = model.factor(m);
    for (Mode m : kModes) j[kBiasKeys[static_cast<std::size_t>(m)]] = model.bias(m);
    return j.dump() + "\n";
}

FactorModel load_model(std::string_view payload) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(payload);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("model: malformed or truncated payload: ") + e.what());
    }
    if (!j.is_object() || j.value("format", "") != kFormatTag) throw DataError("model: not a betanlft model file");
    if (!j.contains("version") || !j["version"].is_number_integer())
        throw DataError("model: missing version");
    if (j["version"].get<int>() != kModelFormatVersion) {
        throw DataError("model: unsupported version " + std::to_string(j["version"].get<int>()) + ", expected " +
                        std::to_string(kModelFormatVersion));
    }
    const auto& jd = j["dims"];
    if (!jd.is_array() || jd.size() != 3 || !j.contains("rank") || !j["rank"].is_number_unsigned())
        throw DataError("model: header needs dims[3] and rank");
    for (const auto& v : jd)
        if (!v.is_number_unsigned()) throw DataError("model: dims must be positive integers");
    const Dims dims{jd[0].get<std::size_t>(), jd[1].get<std::size_t>(), jd[2].get<std::size_t>()};
    const auto rank = j["rank"].get<std::size_t>();
    if (rank < 1 || dims.any_zero()) throw DataError("model: dims and rank must be positive");

    FactorModel model(dims, rank);
    for (Mode m : kModes) read_array(j, kFactorKeys[static_cast<std::size_t>(m)], model.factor(m));
    for (Mode m : kModes) read_array(j, kBiasKeys[static_cast<std::size_t>(m)], model.bias(m));
    if (j.contains("hyper_params")) {
        const auto& hp = j["hyper_params"];
        model.trained_with = {hp.value("beta", 2.0), hp.value("lambda", 0.0), hp.value("lambda_b", 0.0)};
    }
    return model;
}

void save_model_file(const std::filesystem::path& path, const FactorModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << save_model(model);
}

FactorModel load_model_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_model(buf.str());
}

}  // namespace betanlft
