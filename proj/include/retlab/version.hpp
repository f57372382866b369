#pragma once

namespace retlab {

inline constexpr const char* kVersion = "retention-lab 0.1.0";

}  // namespace retlab
