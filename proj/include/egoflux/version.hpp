#pragma once

namespace egoflux {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace egoflux
