#include "collab/se3.hpp"

#include <cmath>
#include <stdexcept>

namespace collab {

void RigidTransform::normalise() {
    q_.normalize();
    // Canonical sign: w >= 0, with a lexicographic tie-break at w == 0 so
    // that 180-degree rotations also have a unique representation.
    const double w = q_.w(), x = q_.x(), y = q_.y(), z = q_.z();
    bool flip = w < 0.0;
    if (w == 0.0) {
        flip = x < 0.0 || (x == 0.0 && (y < 0.0 || (y == 0.0 && z < 0.0)));
    }
    if (flip) q_.coeffs() = -q_.coeffs();
}

RigidTransform RigidTransform::from_axis_angle(const Eigen::Vector3d& axis, double angle_rad,
                                               const Eigen::Vector3d& t) {
    const double n = axis.norm();
    if (n == 0.0) return RigidTransform(Eigen::Quaterniond::Identity(), t);
    return RigidTransform(Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis / n)), t);
}

RigidTransform RigidTransform::from_rotation_vector(const Eigen::Vector3d& rvec,
                                                    const Eigen::Vector3d& t) {
    return from_axis_angle(rvec, rvec.norm(), t);
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    return RigidTransform(a.rotation() * b.rotation(),
                          a.rotation() * b.translation() + a.translation());
}

RigidTransform invert(const RigidTransform& t) {
    const Eigen::Quaterniond qinv = t.rotation().conjugate();
    return RigidTransform(qinv, -(qinv * t.translation()));
}

PoseDistance pose_distance(const RigidTransform& a, const RigidTransform& b) {
    PoseDistance d;
    d.translation_m = (a.translation() - b.translation()).norm();
    const double dot = std::abs(a.rotation().dot(b.rotation()));
    d.angle_deg = 2.0 * std::acos(std::min(1.0, dot)) * 180.0 / M_PI;
    return d;
}

PoseResidual error_vector(const RigidTransform& t) {
    // Constructors keep w >= 0, so the imaginary parts can be read directly.
    PoseResidual r;
    r.qvec = Eigen::Vector3d(t.rotation().x(), t.rotation().y(), t.rotation().z());
    r.tvec = t.translation();
    return r;
}

DualQuaternion DualQuaternion::from_transform(const RigidTransform& t) {
    DualQuaternion dq;
    dq.real = t.rotation();
    const Eigen::Quaterniond tq(0.0, t.translation().x(), t.translation().y(), t.translation().z());
    dq.dual = tq * dq.real;
    dq.dual.coeffs() *= 0.5;
    return dq;
}

RigidTransform DualQuaternion::to_transform() const {
    const Eigen::Quaterniond tq = dual * real.conjugate();
    return RigidTransform(real, 2.0 * Eigen::Vector3d(tq.x(), tq.y(), tq.z()));
}

RigidTransform dqb_blend(std::span<const RigidTransform> samples, std::span<const double> weights) {
    if (samples.empty()) throw std::invalid_argument("no samples to blend");
    if (!weights.empty() && weights.size() != samples.size())
        throw std::invalid_argument("weight count does not match sample count");

    const Eigen::Quaterniond ref = samples[0].rotation();
    Eigen::Vector4d real_sum = Eigen::Vector4d::Zero();
    Eigen::Vector4d dual_sum = Eigen::Vector4d::Zero();
    double weight_sum = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        if (w < 0.0) throw std::invalid_argument("negative blend weight");
        weight_sum += w;
        DualQuaternion dq = DualQuaternion::from_transform(samples[i]);
        const double sign = dq.real.dot(ref) < 0.0 ? -1.0 : 1.0;
        real_sum += (w * sign) * dq.real.coeffs();
        dual_sum += (w * sign) * dq.dual.coeffs();
    }
    if (weight_sum <= 0.0) throw std::invalid_argument("blend weights are all zero");

    const double n = real_sum.norm();
    if (n == 0.0) throw std::invalid_argument("degenerate blend (real part vanished)");
    real_sum /= n;
    dual_sum /= n;
    // Re-impose dot(real, dual) = 0 after the normalisation.
    dual_sum -= real_sum.dot(dual_sum) * real_sum;

    DualQuaternion out;
    out.real = Eigen::Quaterniond(real_sum(3), real_sum(0), real_sum(1), real_sum(2));
    out.dual = Eigen::Quaterniond(dual_sum(3), dual_sum(0), dual_sum(1), dual_sum(2));
    return out.to_transform();
}

}  // namespace collab
