#pragma once

namespace vgram {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace vgram
