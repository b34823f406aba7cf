#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace collab {

/// Pinhole camera model. cx/cy are in pixels; pixel (u, v) spans
/// [u, u+1) x [v, v+1) with its centre at (u + 0.5, v + 0.5).
struct CameraIntrinsics {
    double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
    int width = 0, height = 0;

    bool valid() const {
        return fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx > 0.0 &&
               cx < static_cast<double>(width) && cy > 0.0 && cy < static_cast<double>(height);
    }
};

/// Depth in meters; 0 marks an invalid pixel.
struct DepthImage {
    int width = 0, height = 0;
    std::vector<float> pixels;

    DepthImage() = default;
    DepthImage(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h, 0.0f) {}

    float at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
    float& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    bool valid_at(int x, int y) const { return at(x, y) > 0.0f; }
    size_t count() const { return pixels.size(); }
};

/// Interleaved 8-bit RGB.
struct ColorImage {
    int width = 0, height = 0;
    std::vector<uint8_t> rgb;

    ColorImage() = default;
    ColorImage(int w, int h) : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3, 0) {}

    const uint8_t* at(int x, int y) const { return &rgb[(static_cast<size_t>(y) * width + x) * 3]; }
    uint8_t* at(int x, int y) { return &rgb[(static_cast<size_t>(y) * width + x) * 3]; }
    void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
        uint8_t* p = at(x, y);
        p[0] = r; p[1] = g; p[2] = b;
    }
};

inline void require_same_size(const DepthImage& d, const ColorImage& c) {
    if (d.width != c.width || d.height != c.height)
        throw std::invalid_argument("depth/colour dimension mismatch");
}

inline void require_matches(const DepthImage& d, const CameraIntrinsics& k) {
    if (d.width != k.width || d.height != k.height)
        throw std::invalid_argument("depth/intrinsics dimension mismatch");
}

/// Resamples a colour image onto the depth sensor's pixel grid, assuming the
/// two sensors are co-located (shared pose, different intrinsics).
ColorImage resample_color_to_depth(const ColorImage& color, const CameraIntrinsics& color_k,
                                   const CameraIntrinsics& depth_k);

}  // namespace collab
