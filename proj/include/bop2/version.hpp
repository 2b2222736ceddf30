#pragma once

namespace bop2 {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace bop2
