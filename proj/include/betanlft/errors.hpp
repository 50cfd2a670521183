#pragma once

#include <stdexcept>
#include <string>

namespace betanlft {

/// Bad input data: malformed files, negative values, duplicate triples,
/// inconsistent model payloads.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A multiplicative update produced a non-finite value, or the model
/// collapsed to a non-positive reconstruction where one is required.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace betanlft
