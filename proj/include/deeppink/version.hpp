#pragma once

namespace deeppink {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace deeppink
