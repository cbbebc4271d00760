#pragma once

namespace tacs {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kToolName = "tacs";

} // namespace tacs
