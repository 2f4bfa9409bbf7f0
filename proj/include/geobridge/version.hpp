#pragma once

namespace geobridge {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace geobridge
