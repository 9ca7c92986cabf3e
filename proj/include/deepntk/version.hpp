#pragma once

namespace deepntk {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace deepntk
