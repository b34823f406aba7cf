#pragma once

#include "collab/image.hpp"
#include "collab/se3.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace collab {

/// Identifies one frame of one sub-scene's trajectory.
struct FrameRef {
    int scene = -1;
    int frame_index = -1;
};

/// Side-channel metadata for a relocalisation query: which scene the query
/// image was rendered from and at what pose there. The geometric baseline
/// ignores it; the ground-truth oracle needs it to look up the true answer.
struct QueryContext {
    int target_scene = -1;
    int source_scene = -1;
    int source_frame_index = -1;
    RigidTransform source_pose;  // camera-to-source-scene
};

/// Per-sub-scene relocaliser: trained online from posed frames, answers
/// "what is this frame's camera-to-scene pose?". Returns nothing before the
/// first train call and whenever no confident pose can be produced.
class Relocaliser {
public:
    virtual ~Relocaliser() = default;

    virtual void train(const ColorImage& color, const DepthImage& depth, const RigidTransform& pose,
                       const CameraIntrinsics& k) = 0;

    virtual std::optional<RigidTransform> relocalise(const ColorImage& color,
                                                     const DepthImage& depth,
                                                     const CameraIntrinsics& k,
                                                     const QueryContext* context = nullptr) = 0;
};

/// 3D-3D absolute orientation by RANSAC over 3-point minimal samples with a
/// Kabsch fit, then a final refit on the best inlier set. Correspondences are
/// (source, destination) pairs; the returned transform maps source points
/// onto destination points. Deterministic for a fixed seed.
struct KabschRansacParams {
    int iterations = 200;
    double inlier_threshold = 0.05;       // meters
    double min_triangle_area = 1e-8;      // minimal-sample degeneracy gate
    uint64_t seed = 0;
};

std::optional<std::pair<RigidTransform, int>> kabsch_ransac(
    const std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>>& correspondences,
    const KabschRansacParams& params = {});

/// Exact Kabsch alignment of two equally-sized point sets (no outlier handling).
std::optional<RigidTransform> kabsch(const std::vector<Eigen::Vector3d>& src,
                                     const std::vector<Eigen::Vector3d>& dst);

// ---------------------------------------------------------------------------
// Geometric baseline
// ---------------------------------------------------------------------------

struct BaselineRelocaliserParams {
    int samples_per_frame = 512;
    size_t store_capacity = 200000;
    int min_inliers = 20;
    uint64_t seed = 0;
    KabschRansacParams ransac;
};

/// Scene-coordinate store: (world point, descriptor) pairs harvested from
/// training frames; queries match descriptors by nearest neighbour and solve
/// for the pose with kabsch_ransac. The descriptor is 16 depth differences at
/// fixed depth-scaled offsets plus the pixel's RGB.
class BaselineRelocaliser : public Relocaliser {
public:
    static constexpr int kDescriptorSize = 19;

    explicit BaselineRelocaliser(const BaselineRelocaliserParams& params = {});
    ~BaselineRelocaliser() override;

    void train(const ColorImage& color, const DepthImage& depth, const RigidTransform& pose,
               const CameraIntrinsics& k) override;
    std::optional<RigidTransform> relocalise(const ColorImage& color, const DepthImage& depth,
                                             const CameraIntrinsics& k,
                                             const QueryContext* context = nullptr) override;

    size_t store_size() const;
    const std::vector<Eigen::Vector3d>& world_points() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Ground-truth oracle
// ---------------------------------------------------------------------------

struct OracleConfig {
    /// Maps a query to the true camera-to-target-scene pose, or nothing if
    /// the query cannot be answered (e.g. unknown scene pair).
    std::function<std::optional<RigidTransform>(const QueryContext&)> ground_truth_provider;
    double inlier_noise_trans = 0.0;      // Gaussian sigma, meters
    double inlier_noise_rot_deg = 0.0;    // Gaussian sigma, degrees
    double outlier_rate = 0.0;
    double outlier_magnitude_trans = 1.0;     // uniform ball radius, meters
    double outlier_magnitude_rot_deg = 90.0;  // uniform angle bound, degrees
    double failure_rate = 0.0;
    uint64_t rng_seed = 0;
};

/// Returns the ground-truth pose perturbed by configurable inlier noise,
/// occasional gross outliers, and outright failures. Used to test the
/// relocalisation pipeline and clustering machinery under controlled error.
class OracleRelocaliser : public Relocaliser {
public:
    explicit OracleRelocaliser(OracleConfig config);

    void train(const ColorImage& color, const DepthImage& depth, const RigidTransform& pose,
               const CameraIntrinsics& k) override;
    std::optional<RigidTransform> relocalise(const ColorImage& color, const DepthImage& depth,
                                             const CameraIntrinsics& k,
                                             const QueryContext* context = nullptr) override;

    uint64_t trained_frames() const { return trained_frames_; }

private:
    OracleConfig config_;
    std::mt19937_64 rng_;
    uint64_t trained_frames_ = 0;
};

}  // namespace collab
