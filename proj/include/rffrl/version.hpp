#pragma once

namespace rffrl {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rffrl
