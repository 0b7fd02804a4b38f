#pragma once

namespace gamedp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace gamedp
