#pragma once

namespace wfa {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace wfa
