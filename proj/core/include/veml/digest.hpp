#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace veml {

using Digest = std::array<std::uint8_t, 32>;

inline constexpr std::string_view kDigestAlgorithm = "sha256";

Digest sha256(std::span<const std::uint8_t> bytes);
std::string to_hex(const Digest& digest);

}  // namespace veml
