#pragma once

#include "collab/image.hpp"
#include "collab/mesh.hpp"
#include "collab/se3.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace collab {

struct VolumeParams {
    Eigen::Vector3i dims{256, 256, 256};
    double voxel_size = 0.02;                   // meters
    Eigen::Vector3d origin{0.0, 0.0, 0.0};      // world position of voxel (0,0,0) corner
    double truncation = 0.08;                   // 4 * voxel_size
    uint16_t max_weight = 128;
    double depth_min = 0.1;                     // integration band, meters
    double depth_max = 5.0;

    static VolumeParams cube(int n, double voxel, const Eigen::Vector3d& origin) {
        VolumeParams p;
        p.dims = Eigen::Vector3i(n, n, n);
        p.voxel_size = voxel;
        p.origin = origin;
        p.truncation = 4.0 * voxel;
        return p;
    }
};

/// Dense truncated signed-distance voxel grid. TSDF values live in [-1, 1]
/// (signed distance over the truncation band) and are stored quantised to
/// 16 bits alongside a 16-bit weight and an RGB running average.
///
/// Poses are camera-to-world throughout; depth images use the z-depth
/// convention (distance along the optical axis, not along the ray).
class TsdfVolume {
public:
    explicit TsdfVolume(const VolumeParams& params);

    const VolumeParams& params() const { return params_; }
    size_t voxel_count() const { return tsdf_.size(); }
    uint64_t integrated_frames() const { return integrated_frames_; }

    /// Fuses one posed RGB-D frame. Colour must match the depth resolution;
    /// pass an empty ColorImage to integrate geometry only.
    void integrate(const DepthImage& depth, const ColorImage& color, const RigidTransform& pose,
                   const CameraIntrinsics& k);

    /// Renders synthetic depth/colour by marching rays to the TSDF zero
    /// crossing. Pixels whose ray finds no crossing get depth 0.
    std::pair<DepthImage, ColorImage> raycast(const RigidTransform& pose,
                                              const CameraIntrinsics& k) const;

    /// Marching-cubes triangulation of the zero level set. Empty volume (or a
    /// volume without sign changes) yields an empty mesh.
    Mesh extract_mesh() const;

    // Voxel-level access (tests, mesh extraction).
    bool in_bounds(int x, int y, int z) const {
        return x >= 0 && y >= 0 && z >= 0 && x < params_.dims.x() && y < params_.dims.y() &&
               z < params_.dims.z();
    }
    float tsdf_at(int x, int y, int z) const { return tsdf_[index(x, y, z)] * kDequant; }
    uint16_t weight_at(int x, int y, int z) const { return weight_[index(x, y, z)]; }
    const uint8_t* color_at(int x, int y, int z) const { return &rgb_[index(x, y, z) * 3]; }

    Eigen::Vector3d voxel_centre(int x, int y, int z) const {
        return params_.origin + params_.voxel_size * Eigen::Vector3d(x + 0.5, y + 0.5, z + 0.5);
    }

    /// Trilinear TSDF interpolation at a world point; empty when any of the
    /// eight surrounding voxels is unobserved or out of bounds.
    std::optional<float> sample_tsdf(const Eigen::Vector3d& world) const;
    std::optional<Eigen::Vector3f> sample_color(const Eigen::Vector3d& world) const;

    /// Ray/AABB intersection with the volume bounds, as distance-along-ray limits.
    std::optional<std::pair<double, double>> clip_ray(const Eigen::Vector3d& origin,
                                                      const Eigen::Vector3d& dir) const;

    void save_checkpoint(std::ostream& out) const;
    static TsdfVolume load_checkpoint(std::istream& in);
    void save_checkpoint_file(const std::string& path) const;
    static TsdfVolume load_checkpoint_file(const std::string& path);

private:
    static constexpr float kQuant = 32767.0f;
    static constexpr float kDequant = 1.0f / 32767.0f;

    size_t index(int x, int y, int z) const {
        return (static_cast<size_t>(z) * params_.dims.y() + y) * params_.dims.x() + x;
    }

    VolumeParams params_;
    std::vector<int16_t> tsdf_;
    std::vector<uint16_t> weight_;
    std::vector<uint8_t> rgb_;
    uint64_t integrated_frames_ = 0;
};

}  // namespace collab
