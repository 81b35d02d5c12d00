#pragma once

namespace hdtm {

inline constexpr const char* version = "0.1.0";

}  // namespace hdtm
