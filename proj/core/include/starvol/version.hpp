#pragma once

namespace starvol {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace starvol
