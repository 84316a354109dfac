#pragma once

namespace durations {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace durations
