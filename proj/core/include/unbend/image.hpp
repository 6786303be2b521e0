#pragma once

#include <string>
#include <string_view>

#include "unbend/deform.hpp"

namespace unbend {

/// 8-bit grayscale PNG, values clamped to [0, 1] and scaled by 255. Row j of
/// the image is PNG row j.
[[nodiscard]] std::string encode_png(const Image2D& img);

/// Decodes an 8-bit grayscale PNG back to [0, 1] floats.
[[nodiscard]] Image2D decode_png(std::string_view bytes);

[[nodiscard]] std::string base64_encode(std::string_view bytes);
[[nodiscard]] std::string base64_decode(std::string_view text);

}  // namespace unbend
