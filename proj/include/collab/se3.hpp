#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace collab {

/// A rigid-body transform in SE(3): p' = R(q) * p + t.
///
/// The quaternion is kept unit-norm and sign-canonicalised (w >= 0, ties
/// broken lexicographically on (x,y,z)) by every constructor, so that two
/// transforms are equal iff their stored components are equal.
class RigidTransform {
public:
    RigidTransform() : q_(Eigen::Quaterniond::Identity()), t_(Eigen::Vector3d::Zero()) {}

    RigidTransform(const Eigen::Quaterniond& q, const Eigen::Vector3d& t) : q_(q), t_(t) {
        normalise();
    }

    static RigidTransform identity() { return RigidTransform(); }

    /// Rotation of `angle_rad` about `axis` (need not be unit), then translation by `t`.
    static RigidTransform from_axis_angle(const Eigen::Vector3d& axis, double angle_rad,
                                          const Eigen::Vector3d& t = Eigen::Vector3d::Zero());

    /// Rotation given as a rotation vector (axis * angle), as used for local
    /// increments in the pose-graph optimiser.
    static RigidTransform from_rotation_vector(const Eigen::Vector3d& rvec,
                                               const Eigen::Vector3d& t = Eigen::Vector3d::Zero());

    static RigidTransform translation(double x, double y, double z) {
        return RigidTransform(Eigen::Quaterniond::Identity(), Eigen::Vector3d(x, y, z));
    }

    const Eigen::Quaterniond& rotation() const { return q_; }
    const Eigen::Vector3d& translation() const { return t_; }

    Eigen::Matrix3d rotation_matrix() const { return q_.toRotationMatrix(); }

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return q_ * p + t_; }
    Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return apply(p); }

    /// Components in serialisation order (w, x, y, z, tx, ty, tz).
    std::array<double, 7> coeffs() const {
        return {q_.w(), q_.x(), q_.y(), q_.z(), t_.x(), t_.y(), t_.z()};
    }
    static RigidTransform from_coeffs(const std::array<double, 7>& c) {
        return RigidTransform(Eigen::Quaterniond(c[0], c[1], c[2], c[3]),
                              Eigen::Vector3d(c[4], c[5], c[6]));
    }

private:
    void normalise();

    Eigen::Quaterniond q_;
    Eigen::Vector3d t_;
};

/// Applies B, then A (the matrix product A*B).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

RigidTransform invert(const RigidTransform& t);

/// Translation / rotation split of the difference between two transforms.
struct PoseDistance {
    double translation_m = 0.0;
    double angle_deg = 0.0;

    bool within(double max_translation_m, double max_angle_deg) const {
        return translation_m <= max_translation_m && angle_deg <= max_angle_deg;
    }
    /// Strict-inside variant: both components below their bounds.
    bool strictly_within(double max_translation_m, double max_angle_deg) const {
        return translation_m < max_translation_m && angle_deg < max_angle_deg;
    }
};

/// Symmetric: translation_m = |t_a - t_b|, angle_deg = rotation angle of R_a^-1 R_b,
/// computed as 2*acos(clamp(|<q_a,q_b>|, 0, 1)) for stability near identity.
PoseDistance pose_distance(const RigidTransform& a, const RigidTransform& b);

/// The 6-vector (q_x, q_y, q_z, t_x, t_y, t_z) of a transform with the
/// quaternion sign canonicalised; zero iff the transform is the identity.
struct PoseResidual {
    Eigen::Vector3d qvec = Eigen::Vector3d::Zero();
    Eigen::Vector3d tvec = Eigen::Vector3d::Zero();

    double squared_norm() const { return qvec.squaredNorm() + tvec.squaredNorm(); }
    double norm() const { return std::sqrt(squared_norm()); }
};

PoseResidual error_vector(const RigidTransform& t);

/// Unit dual quaternion: |real| = 1 and dot(real, dual) = 0.
struct DualQuaternion {
    Eigen::Quaterniond real;
    Eigen::Quaterniond dual;

    static DualQuaternion from_transform(const RigidTransform& t);
    RigidTransform to_transform() const;
};

/// Weighted dual-quaternion blend of rigid transforms. Each sample is
/// hemispherised against the first sample's real part before summation, then
/// the sum is renormalised. Weights must be non-negative and not all zero;
/// uniform weights when `weights` is empty.
/// Throws std::invalid_argument("no samples to blend") on an empty sample list.
RigidTransform dqb_blend(std::span<const RigidTransform> samples,
                         std::span<const double> weights = {});

}  // namespace collab
