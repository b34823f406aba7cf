#include "collab/image.hpp"

#include <algorithm>
#include <cmath>

namespace collab {

ColorImage resample_color_to_depth(const ColorImage& color, const CameraIntrinsics& color_k,
                                   const CameraIntrinsics& depth_k) {
    if (color.width != color_k.width || color.height != color_k.height)
        throw std::invalid_argument("colour/intrinsics dimension mismatch");
    ColorImage out(depth_k.width, depth_k.height);
    for (int y = 0; y < out.height; ++y) {
        const double ny = (y + 0.5 - depth_k.cy) / depth_k.fy;
        const double vc = color_k.fy * ny + color_k.cy;
        const int cy = std::clamp(static_cast<int>(std::floor(vc)), 0, color.height - 1);
        for (int x = 0; x < out.width; ++x) {
            const double nx = (x + 0.5 - depth_k.cx) / depth_k.fx;
            const double uc = color_k.fx * nx + color_k.cx;
            const int cx = std::clamp(static_cast<int>(std::floor(uc)), 0, color.width - 1);
            const uint8_t* src = color.at(cx, cy);
            out.set(x, y, src[0], src[1], src[2]);
        }
    }
    return out;
}

}  // namespace collab
