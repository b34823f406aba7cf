#include "collab/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace collab {

TsdfVolume::TsdfVolume(const VolumeParams& params) : params_(params) {
    if (params_.dims.minCoeff() <= 0) throw std::invalid_argument("volume dims must be positive");
    if (params_.voxel_size <= 0.0) throw std::invalid_argument("voxel size must be positive");
    const size_t n = static_cast<size_t>(params_.dims.x()) * params_.dims.y() * params_.dims.z();
    tsdf_.assign(n, 0);
    weight_.assign(n, 0);
    rgb_.assign(n * 3, 0);
}

void TsdfVolume::integrate(const DepthImage& depth, const ColorImage& color,
                           const RigidTransform& pose, const CameraIntrinsics& k) {
    require_matches(depth, k);
    const bool has_color = !color.rgb.empty();
    if (has_color) require_same_size(depth, color);

    const RigidTransform world_to_cam = invert(pose);
    const Eigen::Matrix3d r = world_to_cam.rotation_matrix();
    const Eigen::Vector3d t = world_to_cam.translation();
    const Eigen::Vector3d z_step = r.col(2) * params_.voxel_size;

    const double trunc = params_.truncation;
    const float inv_trunc = static_cast<float>(1.0 / trunc);
    const int nx = params_.dims.x(), ny = params_.dims.y(), nz = params_.dims.z();

    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            // Camera-space position of voxel (x, y, 0); advancing z adds z_step.
            Eigen::Vector3d pc = r * voxel_centre(x, y, 0) + t;
            size_t idx = index(x, y, 0);
            const size_t z_stride = static_cast<size_t>(nx) * ny;
            for (int z = 0; z < nz; ++z, pc += z_step, idx += z_stride) {
                const double depth_cam = pc.z();
                if (depth_cam <= 0.0) continue;
                const int u = static_cast<int>(std::floor(k.fx * pc.x() / depth_cam + k.cx));
                const int v = static_cast<int>(std::floor(k.fy * pc.y() / depth_cam + k.cy));
                if (u < 0 || v < 0 || u >= k.width || v >= k.height) continue;
                const float d = depth.at(u, v);
                if (d <= 0.0f || d < params_.depth_min || d > params_.depth_max) continue;
                const double sdf = d - depth_cam;  // projective signed distance
                if (sdf <= -trunc) continue;
                const float tsdf = std::min(1.0f, static_cast<float>(sdf) * inv_trunc);

                const uint16_t w = weight_[idx];
                const float old = tsdf_[idx] * kDequant;
                const float fused = (old * w + tsdf) / (w + 1.0f);
                tsdf_[idx] = static_cast<int16_t>(std::lround(fused * kQuant));
                if (has_color) {
                    const uint8_t* src = color.at(u, v);
                    uint8_t* dst = &rgb_[idx * 3];
                    for (int c = 0; c < 3; ++c) {
                        const float fc = (dst[c] * static_cast<float>(w) + src[c]) / (w + 1.0f);
                        dst[c] = static_cast<uint8_t>(std::lround(fc));
                    }
                }
                weight_[idx] = std::min<uint16_t>(w + 1, params_.max_weight);
            }
        }
    }
    ++integrated_frames_;
}

std::optional<std::pair<double, double>> TsdfVolume::clip_ray(const Eigen::Vector3d& origin,
                                                              const Eigen::Vector3d& dir) const {
    const Eigen::Vector3d lo = params_.origin;
    const Eigen::Vector3d hi =
        params_.origin + params_.voxel_size * params_.dims.cast<double>();
    double tmin = 0.0, tmax = std::numeric_limits<double>::max();
    for (int i = 0; i < 3; ++i) {
        if (std::abs(dir(i)) < 1e-12) {
            if (origin(i) < lo(i) || origin(i) > hi(i)) return std::nullopt;
            continue;
        }
        double t0 = (lo(i) - origin(i)) / dir(i);
        double t1 = (hi(i) - origin(i)) / dir(i);
        if (t0 > t1) std::swap(t0, t1);
        tmin = std::max(tmin, t0);
        tmax = std::min(tmax, t1);
    }
    if (tmin >= tmax) return std::nullopt;
    return std::make_pair(tmin, tmax);
}

std::optional<float> TsdfVolume::sample_tsdf(const Eigen::Vector3d& world) const {
    const Eigen::Vector3d g = (world - params_.origin) / params_.voxel_size - Eigen::Vector3d::Constant(0.5);
    const int x0 = static_cast<int>(std::floor(g.x()));
    const int y0 = static_cast<int>(std::floor(g.y()));
    const int z0 = static_cast<int>(std::floor(g.z()));
    if (!in_bounds(x0, y0, z0) || !in_bounds(x0 + 1, y0 + 1, z0 + 1)) return std::nullopt;
    const double fx = g.x() - x0, fy = g.y() - y0, fz = g.z() - z0;

    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const size_t idx = index(x0 + dx, y0 + dy, z0 + dz);
                if (weight_[idx] == 0) return std::nullopt;
                const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy) * (dz ? fz : 1.0 - fz);
                acc += w * (tsdf_[idx] * kDequant);
            }
    return static_cast<float>(acc);
}

std::optional<Eigen::Vector3f> TsdfVolume::sample_color(const Eigen::Vector3d& world) const {
    const Eigen::Vector3d g = (world - params_.origin) / params_.voxel_size - Eigen::Vector3d::Constant(0.5);
    const int x0 = static_cast<int>(std::floor(g.x()));
    const int y0 = static_cast<int>(std::floor(g.y()));
    const int z0 = static_cast<int>(std::floor(g.z()));
    if (!in_bounds(x0, y0, z0) || !in_bounds(x0 + 1, y0 + 1, z0 + 1)) return std::nullopt;
    const double fx = g.x() - x0, fy = g.y() - y0, fz = g.z() - z0;

    Eigen::Vector3f acc = Eigen::Vector3f::Zero();
    double wsum = 0.0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const size_t idx = index(x0 + dx, y0 + dy, z0 + dz);
                if (weight_[idx] == 0) continue;
                const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy) * (dz ? fz : 1.0 - fz);
                wsum += w;
                acc += static_cast<float>(w) *
                       Eigen::Vector3f(rgb_[idx * 3], rgb_[idx * 3 + 1], rgb_[idx * 3 + 2]);
            }
    if (wsum <= 0.0) return std::nullopt;
    return acc / static_cast<float>(wsum);
}

std::pair<DepthImage, ColorImage> TsdfVolume::raycast(const RigidTransform& pose,
                                                      const CameraIntrinsics& k) const {
    DepthImage depth(k.width, k.height);
    ColorImage color(k.width, k.height);

    const Eigen::Matrix3d r = pose.rotation_matrix();
    const Eigen::Vector3d cam_origin = pose.translation();
    const double coarse_step = params_.voxel_size * 0.5;

    for (int v = 0; v < k.height; ++v) {
        for (int u = 0; u < k.width; ++u) {
            // Ray through the pixel centre; parameterised so that the
            // parameter value equals z-depth in camera space.
            const Eigen::Vector3d dc((u + 0.5 - k.cx) / k.fx, (v + 0.5 - k.cy) / k.fy, 1.0);
            const Eigen::Vector3d dw = r * dc;
            const double dn = dw.norm();

            auto clip = clip_ray(cam_origin, dw);
            if (!clip) continue;
            const double z_begin = std::max(clip->first, 0.05);
            const double z_end = clip->second;
            if (z_begin >= z_end) continue;

            const double dz = coarse_step / dn;
            double prev_z = 0.0;
            float prev_val = 0.0f;
            bool prev_valid = false;
            double hit_z = -1.0;

            for (double z = z_begin; z <= z_end; z += dz) {
                const auto s = sample_tsdf(cam_origin + z * dw);
                if (s) {
                    if (prev_valid && prev_val > 0.0f && *s <= 0.0f) {
                        // Bracket the crossing, then bisect.
                        double z0 = prev_z, z1 = z;
                        float f0 = prev_val, f1 = *s;
                        for (int it = 0; it < 10; ++it) {
                            const double zm = 0.5 * (z0 + z1);
                            const auto sm = sample_tsdf(cam_origin + zm * dw);
                            if (!sm) break;
                            if (*sm > 0.0f) {
                                z0 = zm; f0 = *sm;
                            } else {
                                z1 = zm; f1 = *sm;
                            }
                        }
                        hit_z = (f0 - f1) != 0.0f ? z0 + (z1 - z0) * f0 / (f0 - f1)
                                                  : 0.5 * (z0 + z1);
                        break;
                    }
                    prev_val = *s;
                    prev_valid = true;
                } else {
                    prev_valid = false;
                }
                prev_z = z;
            }

            if (hit_z > 0.0) {
                depth.at(u, v) = static_cast<float>(hit_z);
                if (const auto c = sample_color(cam_origin + hit_z * dw)) {
                    color.set(u, v, static_cast<uint8_t>(std::lround(std::clamp((*c)(0), 0.0f, 255.0f))),
                              static_cast<uint8_t>(std::lround(std::clamp((*c)(1), 0.0f, 255.0f))),
                              static_cast<uint8_t>(std::lround(std::clamp((*c)(2), 0.0f, 255.0f))));
                }
            }
        }
    }
    return {std::move(depth), std::move(color)};
}

namespace {

constexpr char kVolumeMagic[8] = {'C', 'M', 'V', 'O', 'L', '0', '0', '1'};
constexpr size_t kHeaderSize = 64;

}  // namespace

void TsdfVolume::save_checkpoint(std::ostream& out) const {
    char header[kHeaderSize] = {0};
    std::memcpy(header, kVolumeMagic, sizeof(kVolumeMagic));
    uint32_t dims[3] = {static_cast<uint32_t>(params_.dims.x()),
                        static_cast<uint32_t>(params_.dims.y()),
                        static_cast<uint32_t>(params_.dims.z())};
    std::memcpy(header + 8, dims, sizeof(dims));
    std::memcpy(header + 20, &params_.voxel_size, sizeof(double));
    double origin[3] = {params_.origin.x(), params_.origin.y(), params_.origin.z()};
    std::memcpy(header + 28, origin, sizeof(origin));
    out.write(header, kHeaderSize);
    out.write(reinterpret_cast<const char*>(tsdf_.data()), tsdf_.size() * sizeof(int16_t));
    out.write(reinterpret_cast<const char*>(weight_.data()), weight_.size() * sizeof(uint16_t));
    out.write(reinterpret_cast<const char*>(rgb_.data()), rgb_.size());
    if (!out) throw std::runtime_error("volume checkpoint write failed");
}

TsdfVolume TsdfVolume::load_checkpoint(std::istream& in) {
    char header[kHeaderSize];
    in.read(header, kHeaderSize);
    if (!in || std::memcmp(header, kVolumeMagic, sizeof(kVolumeMagic)) != 0)
        throw std::runtime_error("bad volume checkpoint header");
    uint32_t dims[3];
    std::memcpy(dims, header + 8, sizeof(dims));
    VolumeParams p;
    p.dims = Eigen::Vector3i(dims[0], dims[1], dims[2]);
    std::memcpy(&p.voxel_size, header + 20, sizeof(double));
    double origin[3];
    std::memcpy(origin, header + 28, sizeof(origin));
    p.origin = Eigen::Vector3d(origin[0], origin[1], origin[2]);
    p.truncation = 4.0 * p.voxel_size;

    TsdfVolume vol(p);
    in.read(reinterpret_cast<char*>(vol.tsdf_.data()), vol.tsdf_.size() * sizeof(int16_t));
    in.read(reinterpret_cast<char*>(vol.weight_.data()), vol.weight_.size() * sizeof(uint16_t));
    in.read(reinterpret_cast<char*>(vol.rgb_.data()), vol.rgb_.size());
    if (!in) throw std::runtime_error("volume checkpoint truncated");
    return vol;
}

void TsdfVolume::save_checkpoint_file(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    save_checkpoint(f);
}

TsdfVolume TsdfVolume::load_checkpoint_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    return load_checkpoint(f);
}

}  // namespace collab
