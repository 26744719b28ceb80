#pragma once

namespace z2lgt {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace z2lgt
