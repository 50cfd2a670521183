#include "betanlft/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "betanlft/errors.hpp"
#include "betanlft/numfmt.hpp"

namespace betanlft {

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::User: return "user";
        case Mode::Service: return "service";
        case Mode::Time: return "time";
    }
    return "?";
}

namespace {

std::uint64_t linear_key(const Dims& d, const Observation& o) {
    return (static_cast<std::uint64_t>(o.i) * d.services + o.j) * d.slots + o.k;
}

std::string describe(const Observation& o) {
    std::ostringstream out;
    out << "(" << o.i << "," << o.j << "," << o.k << ")";
    return out.str();
}

}  // namespace

ObservedTensor::ObservedTensor(Dims dims, std::vector<Observation> entries)
    : dims_(dims), entries_(std::move(entries)) {
    if (dims_.any_zero() && !entries_.empty()) throw DataError("tensor dims must be positive");

    std::vector<std::uint64_t> keys;
    keys.reserve(entries_.size());
    for (const auto& o : entries_) {
        if (o.i >= dims_.users || o.j >= dims_.services || o.k >= dims_.slots)
            throw DataError("observation " + describe(o) + " outside tensor dims");
        if (!std::isfinite(o.y)) throw DataError("observation " + describe(o) + " is not finite");
        if (o.y < 0.0)
            throw DataError("observation " + describe(o) + " is negative; QoS values must be nonnegative");
        keys.push_back(linear_key(dims_, o));
    }
    std::sort(keys.begin(), keys.end());
    if (auto dup = std::adjacent_find(keys.begin(), keys.end()); dup != keys.end()) {
        const auto key = *dup;
        Observation o;
        o.k = key % dims_.slots;
        o.j = (key / dims_.slots) % dims_.services;
        o.i = key / dims_.slots / dims_.services;
        throw DataError("duplicate observation " + describe(o));
    }

    for (Mode m : kModes) {
        auto& s = slices_[static_cast<std::size_t>(m)];
        const std::size_t n = dims_[m];
        s.offsets.assign(n + 1, 0);
        for (const auto& o : entries_) ++s.offsets[o.index(m) + 1];
        std::partial_sum(s.offsets.begin(), s.offsets.end(), s.offsets.begin());
        s.ids.resize(entries_.size());
        std::vector<std::size_t> cursor(s.offsets.begin(), s.offsets.end() - 1);
        for (std::size_t e = 0; e < entries_.size(); ++e) s.ids[cursor[entries_[e].index(m)]++] = e;
    }
}

ObservedTensor parse_observations(std::string_view text, std::optional<Dims> dims, std::string_view source) {
    std::vector<Observation> entries;
    std::vector<std::size_t> line_of;
    Dims inferred{};

    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string_view::npos || line[first] == '#') continue;

        const auto fail = [&](const std::string& why) {
            std::ostringstream out;
            out << source << ":" << line_no << ": " << why;
            throw DataError(out.str());
        };

        std::array<std::string_view, 4> fields;
        std::size_t count = 0;
        std::string_view rest = line;
        while (true) {
            const auto comma = rest.find(',');
            if (count == fields.size()) fail("expected 4 fields i,j,k,y");
            fields[count++] = rest.substr(0, comma);
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
        if (count != 4) fail("expected 4 fields i,j,k,y");

        Observation o;
        if (!parse_index(fields[0], o.i) || !parse_index(fields[1], o.j) || !parse_index(fields[2], o.k))
            fail("indices must be nonnegative integers");
        if (!parse_double(fields[3], o.y) || !std::isfinite(o.y)) fail("value is not a finite number");
        if (o.y < 0.0) fail("negative value; QoS values must be nonnegative");
        if (dims && (o.i >= dims->users || o.j >= dims->services || o.k >= dims->slots))
            fail("index outside declared dims");

        inferred.users = std::max(inferred.users, o.i + 1);
        inferred.services = std::max(inferred.services, o.j + 1);
        inferred.slots = std::max(inferred.slots, o.k + 1);
        entries.push_back(o);
        line_of.push_back(line_no);
    }

    const Dims final_dims = dims.value_or(inferred);
    std::unordered_map<std::uint64_t, std::size_t> first_line;
    first_line.reserve(entries.size());
    for (std::size_t e = 0; e < entries.size(); ++e) {
        auto [it, inserted] = first_line.emplace(linear_key(final_dims, entries[e]), line_of[e]);
        if (!inserted) {
            std::ostringstream out;
            out << source << ":" << line_of[e] << ": duplicate observation " << describe(entries[e])
                << " (first seen on line " << it->second << ")";
            throw DataError(out.str());
        }
    }
    return ObservedTensor(final_dims, std::move(entries));
}

ObservedTensor load_observations(const std::filesystem::path& path, std::optional<Dims> dims) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_observations(buf.str(), dims, path.string());
}

std::string format_observations(const ObservedTensor& tensor) {
    std::string out;
    out.reserve(tensor.size() * 24);
    for (const auto& o : tensor.entries()) {
        out += std::to_string(o.i);
        out += ',';
        out += std::to_string(o.j);
        out += ',';
        out += std::to_string(o.k);
        out += ',';
        out += format_double(o.y);
        out += '\n';
    }
    return out;
}

void save_observations(const std::filesystem::path& path, const ObservedTensor& tensor) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << format_observations(tensor);
}

SplitRatios parse_split_ratios(std::string_view text) {
    std::array<double, 3> parts{};
    std::size_t count = 0;
    while (true) {
        const auto colon = text.find(':');
        if (count == parts.size() || !parse_double(text.substr(0, colon), parts[count]) || parts[count] < 0.0)
            throw std::invalid_argument("split must look like 7:1:2");
        ++count;
        if (colon == std::string_view::npos) break;
        text = text.substr(colon + 1);
    }
    const double total = parts[0] + parts[1] + parts[2];
    if (count != 3 || !(total > 0.0)) throw std::invalid_argument("split must look like 7:1:2");
    return {parts[0] / total, parts[1] / total, parts[2] / total};
}

DataSplit split(const ObservedTensor& source, const SplitRatios& ratios, std::uint64_t seed) {
    const double sum = ratios.train + ratios.validation + ratios.test;
    if (ratios.train < 0.0 || ratios.validation < 0.0 || ratios.test < 0.0 || std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split ratios must be nonnegative and sum to 1");
    const std::size_t n = source.size();
    if (ratios.train > 0.0 && ratios.validation > 0.0 && ratios.test > 0.0 && n < 3)
        throw std::invalid_argument("need at least 3 entries for a three-way split");

    // The small slack keeps products like 0.7 * 10 from flooring to 6.
    const auto bucket = [n](double r) {
        return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9));
    };
    const std::size_t n_val = bucket(ratios.validation);
    const std::size_t n_test = bucket(ratios.test);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    // 0 = train, 1 = validation, 2 = test
    std::vector<unsigned char> bucket_of(n, 0);
    for (std::size_t p = 0; p < n_val; ++p) bucket_of[order[p]] = 1;
    for (std::size_t p = n_val; p < n_val + n_test; ++p) bucket_of[order[p]] = 2;

    std::array<std::vector<Observation>, 3> parts;
    for (std::size_t e = 0; e < n; ++e) parts[bucket_of[e]].push_back(source[e]);

    DataSplit out;
    out.train = ObservedTensor(source.dims(), std::move(parts[0]));
    out.validation = ObservedTensor(source.dims(), std::move(parts[1]));
    out.test = ObservedTensor(source.dims(), std::move(parts[2]));
    out.seed = seed;
    return out;
}

std::string split_manifest_json(const DataSplit& split, const SplitRatios& ratios) {
    const auto& d = split.train.dims();
    nlohmann::ordered_json j;
    j["seed"] = split.seed;
    j["ratios"] = {ratios.train, ratios.validation, ratios.test};
    j["dims"] = {d.users, d.services, d.slots};
    j["counts"] = {{"train", split.train.size()},
                   {"validation", split.validation.size()},
                   {"test", split.test.size()}};
    return j.dump(2) + "\n";
}

}  // namespace betanlft
