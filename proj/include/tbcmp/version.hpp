#pragma once

namespace tbcmp {

inline constexpr const char* kToolName = "tbcmp";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace tbcmp
