#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace veml {

// Structured key-value documents. nlohmann::json keeps object keys in a
// std::map, so dump() is already sorted-key canonical.
using Document = nlohmann::json;

std::string canonical(const Document& doc);

// Flattens nested objects into dotted leaf paths. Arrays and scalars are
// leaves; an empty object is a leaf as well so it is not lost.
std::vector<std::pair<std::string, Document>> flatten(const Document& doc);

// Splits "a.b.c" into segments. Throws invalid_argument on empty segments.
std::vector<std::string> split_path(std::string_view dotted);

}  // namespace veml
