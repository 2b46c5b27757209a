#pragma once

namespace tqa {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tqa
