#pragma once

namespace bspm {

inline constexpr const char* kToolVersion = "0.1.0";

} // namespace bspm
