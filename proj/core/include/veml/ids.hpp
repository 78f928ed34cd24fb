#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>

#include <json.hpp>

namespace veml {

// Integer identifier tagged by the entity it names, so sample, version and
// node ids cannot be mixed up.
template <class Tag>
struct Id {
  std::uint64_t value = 0;

  constexpr Id() = default;
  constexpr explicit Id(std::uint64_t v) : value(v) {}

  constexpr auto operator<=>(const Id&) const = default;
};

template <class Tag>
std::ostream& operator<<(std::ostream& os, Id<Tag> id) {
  return os << id.value;
}

template <class Tag>
void to_json(nlohmann::json& j, Id<Tag> id) {
  j = id.value;
}

template <class Tag>
void from_json(const nlohmann::json& j, Id<Tag>& id) {
  id.value = j.get<std::uint64_t>();
}

struct SampleTag {};
struct VersionTag {};
struct NodeTag {};

using SampleId = Id<SampleTag>;
using VersionId = Id<VersionTag>;
using NodeId = Id<NodeTag>;

}  // namespace veml

template <class Tag>
struct std::hash<veml::Id<Tag>> {
  std::size_t operator()(veml::Id<Tag> id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};
