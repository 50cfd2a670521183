#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace betanlft {

/// The three tensor modes: user (i), service (j), time slot (k).
enum class Mode : std::size_t { User = 0, Service = 1, Time = 2 };

inline constexpr std::array<Mode, 3> kModes{Mode::User, Mode::Service, Mode::Time};

const char* mode_name(Mode m);

struct Dims {
    std::size_t users = 0;
    std::size_t services = 0;
    std::size_t slots = 0;

    std::size_t operator[](Mode m) const {
        switch (m) {
            case Mode::User: return users;
            case Mode::Service: return services;
            case Mode::Time: return slots;
        }
        return 0;
    }
    std::size_t dense_size() const { return users * services * slots; }
    bool any_zero() const { return users == 0 || services == 0 || slots == 0; }
    friend bool operator==(const Dims&, const Dims&) = default;
};

struct Observation {
    std::size_t i = 0;
    std::size_t j = 0;
    std::size_t k = 0;
    double y = 0.0;

    std::size_t index(Mode m) const {
        switch (m) {
            case Mode::User: return i;
            case Mode::Service: return j;
            case Mode::Time: return k;
        }
        return 0;
    }
    friend bool operator==(const Observation&, const Observation&) = default;
};

/// Sparse, nonnegative, incomplete 3-way tensor. Holds the observed entry
/// set together with per-slice lists of entry positions, so that every
/// per-user / per-service / per-slot sum runs over its own slice only.
///
/// Immutable after construction.
class ObservedTensor {
public:
    ObservedTensor() = default;

    /// Validates every entry (bounds, y >= 0, finite, no duplicate triple)
    /// and builds the slice lists. Throws DataError on violation.
    ObservedTensor(Dims dims, std::vector<Observation> entries);

    const Dims& dims() const { return dims_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<Observation>& entries() const { return entries_; }
    const Observation& operator[](std::size_t e) const { return entries_[e]; }

    /// Positions (into entries()) of the observations whose mode-m index is idx.
    std::span<const std::size_t> slice(Mode m, std::size_t idx) const {
        const auto& s = slices_[static_cast<std::size_t>(m)];
        return {s.ids.data() + s.offsets[idx], s.offsets[idx + 1] - s.offsets[idx]};
    }

    std::size_t slice_size(Mode m, std::size_t idx) const {
        const auto& s = slices_[static_cast<std::size_t>(m)];
        return s.offsets[idx + 1] - s.offsets[idx];
    }

private:
    // CSR layout: ids[offsets[idx] .. offsets[idx+1]) belong to slice idx.
    struct SliceIndex {
        std::vector<std::size_t> offsets;
        std::vector<std::size_t> ids;
    };

    Dims dims_{};
    std::vector<Observation> entries_;
    std::array<SliceIndex, 3> slices_{};
};

/// Reads `i,j,k,y` CSV. Lines starting with `#` and blank lines are skipped.
/// When dims is not given, each mode's size is its max index + 1.
ObservedTensor load_observations(const std::filesystem::path& path,
                                 std::optional<Dims> dims = std::nullopt);

/// Parses the same format from memory. `source` names the input in errors.
ObservedTensor parse_observations(std::string_view text, std::optional<Dims> dims = std::nullopt,
                                  std::string_view source = "<memory>");

/// Writes `i,j,k,y` with shortest round-trip formatting of y.
void save_observations(const std::filesystem::path& path, const ObservedTensor& tensor);
std::string format_observations(const ObservedTensor& tensor);

struct SplitRatios {
    double train = 0.7;
    double validation = 0.1;
    double test = 0.2;
};

/// Parses "7:1:2" style ratios, normalised to sum to one.
SplitRatios parse_split_ratios(std::string_view text);

struct DataSplit {
    ObservedTensor train;
    ObservedTensor validation;
    ObservedTensor test;
    std::uint64_t seed = 0;
};

/// Seeded random partition. Validation and test sizes are floor(r * n);
/// the remainder goes to train. Each part keeps the source entry order.
DataSplit split(const ObservedTensor& source, const SplitRatios& ratios, std::uint64_t seed);

/// JSON sidecar: seed, ratios and per-set counts.
std::string split_manifest_json(const DataSplit& split, const SplitRatios& ratios);

}  // namespace betanlft
