#pragma once

namespace pftrain {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pftrain
