#pragma once

namespace twr {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace twr
