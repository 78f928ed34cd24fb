#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace veml::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitDriftMismatch = 2;
inline constexpr int kExitInternal = 3;

// args excludes the program name. env_store is the value of VEML_STORE, if
// set; --store takes precedence over it.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        std::optional<std::string> env_store = std::nullopt);

}  // namespace veml::cli
