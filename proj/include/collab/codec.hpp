#pragma once

#include "collab/image.hpp"

#include <cstdint>
#include <vector>

namespace collab {

/// Depth <-> 16-bit millimetre quantisation (0 = invalid). Values outside the
/// representable range are clamped.
std::vector<uint16_t> depth_to_millimetres(const DepthImage& depth);
DepthImage depth_from_millimetres(const std::vector<uint16_t>& mm, int width, int height);

/// Lossless 16-bit grayscale PNG of millimetre depth.
std::vector<uint8_t> encode_depth_png(const DepthImage& depth);
DepthImage decode_depth_png(const std::vector<uint8_t>& bytes);

/// Lossy JPEG, quality in [1, 100].
std::vector<uint8_t> encode_color_jpeg(const ColorImage& color, int quality = 90);
ColorImage decode_color_jpeg(const std::vector<uint8_t>& bytes);

}  // namespace collab
