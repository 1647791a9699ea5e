#pragma once

namespace starkloc {

inline constexpr const char* version = "0.1.0";

} // namespace starkloc
