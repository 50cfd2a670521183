#pragma once

#include <string>
#include <string_view>

namespace betanlft {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

/// Strict parse of a whole field (surrounding blanks allowed). Returns false
/// on any leftover characters.
bool parse_double(std::string_view field, double& out);
bool parse_index(std::string_view field, std::size_t& out);

}  // namespace betanlft
