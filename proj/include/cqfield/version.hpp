#pragma once

namespace cqfield {

inline constexpr const char* kToolName = "cqfield";
inline constexpr const char* kToolVersion = "0.1.0";

} // namespace cqfield
