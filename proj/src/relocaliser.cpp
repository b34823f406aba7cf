#include "collab/relocaliser.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace collab {

std::optional<RigidTransform> kabsch(const std::vector<Eigen::Vector3d>& src,
                                     const std::vector<Eigen::Vector3d>& dst) {
    if (src.size() != dst.size() || src.size() < 3) return std::nullopt;
    const size_t n = src.size();
    Eigen::Vector3d cs = Eigen::Vector3d::Zero(), cd = Eigen::Vector3d::Zero();
    for (size_t i = 0; i < n; ++i) {
        cs += src[i];
        cd += dst[i];
    }
    cs /= static_cast<double>(n);
    cd /= static_cast<double>(n);

    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (size_t i = 0; i < n; ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    const Eigen::Matrix3d r = svd.matrixV() * d * svd.matrixU().transpose();
    return RigidTransform(Eigen::Quaterniond(r), cd - r * cs);
}

namespace {

double triangle_area3(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                      const Eigen::Vector3d& c) {
    return 0.5 * (b - a).cross(c - a).norm();
}

}  // namespace

std::optional<std::pair<RigidTransform, int>> kabsch_ransac(
    const std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>>& correspondences,
    const KabschRansacParams& params) {
    const size_t n = correspondences.size();
    if (n < 3) return std::nullopt;

    std::mt19937_64 rng(params.seed);
    std::uniform_int_distribution<size_t> pick(0, n - 1);
    const double thresh_sq = params.inlier_threshold * params.inlier_threshold;

    int best_inliers = -1;
    RigidTransform best;
    std::vector<Eigen::Vector3d> s3(3), d3(3);

    for (int it = 0; it < params.iterations; ++it) {
        size_t i0 = pick(rng), i1 = pick(rng), i2 = pick(rng);
        if (i0 == i1 || i1 == i2 || i0 == i2) continue;
        s3[0] = correspondences[i0].first;
        s3[1] = correspondences[i1].first;
        s3[2] = correspondences[i2].first;
        if (triangle_area3(s3[0], s3[1], s3[2]) < params.min_triangle_area) continue;
        d3[0] = correspondences[i0].second;
        d3[1] = correspondences[i1].second;
        d3[2] = correspondences[i2].second;
        const auto model = kabsch(s3, d3);
        if (!model) continue;

        int inliers = 0;
        for (const auto& [s, d] : correspondences)
            if ((model->apply(s) - d).squaredNorm() < thresh_sq) ++inliers;
        if (inliers > best_inliers) {
            best_inliers = inliers;
            best = *model;
        }
    }
    if (best_inliers < 3) return std::nullopt;

    // Refit on the best model's inlier set.
    std::vector<Eigen::Vector3d> src, dst;
    src.reserve(best_inliers);
    dst.reserve(best_inliers);
    for (const auto& [s, d] : correspondences)
        if ((best.apply(s) - d).squaredNorm() < thresh_sq) {
            src.push_back(s);
            dst.push_back(d);
        }
    const auto refit = kabsch(src, dst);
    if (!refit) return std::make_pair(best, best_inliers);

    int refit_inliers = 0;
    for (const auto& [s, d] : correspondences)
        if ((refit->apply(s) - d).squaredNorm() < thresh_sq) ++refit_inliers;
    if (refit_inliers >= best_inliers) return std::make_pair(*refit, refit_inliers);
    return std::make_pair(best, best_inliers);
}

// ---------------------------------------------------------------------------
// Baseline
// ---------------------------------------------------------------------------

namespace {

using Descriptor = std::array<float, BaselineRelocaliser::kDescriptorSize>;

// 16 probe directions (pixels at 1m depth); scaled by 1/depth at runtime.
const float kProbeOffsets[16][2] = {
    {14, 0},  {-14, 0}, {0, 14},  {0, -14}, {10, 10},  {-10, -10}, {10, -10}, {-10, 10},
    {28, 0},  {-28, 0}, {0, 28},  {0, -28}, {20, 20},  {-20, -20}, {20, -20}, {-20, 20}};

float descriptor_dist_sq(const Descriptor& a, const Descriptor& b, float cutoff) {
    float acc = 0.0f;
    for (int i = 0; i < BaselineRelocaliser::kDescriptorSize; ++i) {
        const float d = a[i] - b[i];
        acc += d * d;
        if (acc >= cutoff) return acc;
    }
    return acc;
}

/// Exact nearest-neighbour kd-tree over fixed-length descriptors.
class DescriptorKdTree {
public:
    void build(const std::vector<Descriptor>& points) {
        points_ = &points;
        order_.resize(points.size());
        std::iota(order_.begin(), order_.end(), 0u);
        nodes_.clear();
        nodes_.reserve(points.size() / kLeafSize * 2 + 2);
        if (!points.empty()) root_ = build_node(0, points.size());
    }

    int nearest(const Descriptor& q) const {
        if (!points_ || points_->empty()) return -1;
        int best = -1;
        float best_d = std::numeric_limits<float>::max();
        search(root_, q, best, best_d);
        return best;
    }

private:
    static constexpr size_t kLeafSize = 16;

    struct Node {
        int axis = -1;       // -1 marks a leaf
        float split = 0.0f;
        int left = -1, right = -1;
        uint32_t begin = 0, end = 0;
    };

    int build_node(size_t begin, size_t end) {
        Node node;
        if (end - begin <= kLeafSize) {
            node.begin = static_cast<uint32_t>(begin);
            node.end = static_cast<uint32_t>(end);
            nodes_.push_back(node);
            return static_cast<int>(nodes_.size() - 1);
        }
        // Split on the dimension with the largest spread.
        int axis = 0;
        float best_spread = -1.0f;
        for (int d = 0; d < BaselineRelocaliser::kDescriptorSize; ++d) {
            float lo = std::numeric_limits<float>::max(), hi = -lo;
            for (size_t i = begin; i < end; ++i) {
                const float v = (*points_)[order_[i]][d];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                axis = d;
            }
        }
        const size_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](uint32_t a, uint32_t b) { return (*points_)[a][axis] < (*points_)[b][axis]; });
        node.axis = axis;
        node.split = (*points_)[order_[mid]][axis];
        const int self = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        const int left = build_node(begin, mid);
        const int right = build_node(mid, end);
        nodes_[self].left = left;
        nodes_[self].right = right;
        return self;
    }

    void search(int node_idx, const Descriptor& q, int& best, float& best_d) const {
        const Node& node = nodes_[node_idx];
        if (node.axis < 0) {
            for (uint32_t i = node.begin; i < node.end; ++i) {
                const float d = descriptor_dist_sq((*points_)[order_[i]], q, best_d);
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(order_[i]);
                }
            }
            return;
        }
        const float delta = q[node.axis] - node.split;
        const int near = delta < 0.0f ? node.left : node.right;
        const int far = delta < 0.0f ? node.right : node.left;
        search(near, q, best, best_d);
        if (delta * delta < best_d) search(far, q, best, best_d);
    }

    const std::vector<Descriptor>* points_ = nullptr;
    std::vector<uint32_t> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace

struct BaselineRelocaliser::Impl {
    BaselineRelocaliserParams params;
    std::mt19937_64 rng;
    std::vector<Eigen::Vector3d> world_points;
    std::vector<Descriptor> descriptors;
    uint64_t total_inserted = 0;
    DescriptorKdTree tree;
    bool tree_dirty = true;
    bool trained = false;

    explicit Impl(const BaselineRelocaliserParams& p) : params(p), rng(p.seed) {}

    struct SampledFeature {
        Eigen::Vector3d cam_point;
        Descriptor descriptor;
    };

    std::vector<SampledFeature> sample_features(const ColorImage& color, const DepthImage& depth,
                                                const CameraIntrinsics& k) {
        std::vector<SampledFeature> out;
        // Jittered grid sized so that cell count ~= samples_per_frame.
        const double aspect = static_cast<double>(k.width) / k.height;
        int gw = std::max(1, static_cast<int>(std::lround(std::sqrt(params.samples_per_frame * aspect))));
        int gh = std::max(1, (params.samples_per_frame + gw - 1) / gw);
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        for (int gy = 0; gy < gh && static_cast<int>(out.size()) < params.samples_per_frame; ++gy) {
            for (int gx = 0; gx < gw && static_cast<int>(out.size()) < params.samples_per_frame; ++gx) {
                const int px = std::min(k.width - 1,
                                        static_cast<int>((gx + unit(rng)) * k.width / gw));
                const int py = std::min(k.height - 1,
                                        static_cast<int>((gy + unit(rng)) * k.height / gh));
                const float d = depth.at(px, py);
                if (d <= 0.0f) continue;

                SampledFeature f;
                f.cam_point = Eigen::Vector3d((px + 0.5 - k.cx) / k.fx * d,
                                              (py + 0.5 - k.cy) / k.fy * d, d);
                for (int i = 0; i < 16; ++i) {
                    const int ox = px + static_cast<int>(std::lround(kProbeOffsets[i][0] / d));
                    const int oy = py + static_cast<int>(std::lround(kProbeOffsets[i][1] / d));
                    float nd = 0.0f;
                    if (ox >= 0 && oy >= 0 && ox < k.width && oy < k.height) nd = depth.at(ox, oy);
                    f.descriptor[i] = nd > 0.0f ? nd - d : 0.0f;
                }
                const uint8_t* c = color.at(px, py);
                f.descriptor[16] = c[0] / 255.0f;
                f.descriptor[17] = c[1] / 255.0f;
                f.descriptor[18] = c[2] / 255.0f;
                out.push_back(std::move(f));
            }
        }
        return out;
    }

    void insert(const Eigen::Vector3d& world, const Descriptor& desc) {
        ++total_inserted;
        if (world_points.size() < params.store_capacity) {
            world_points.push_back(world);
            descriptors.push_back(desc);
        } else {
            // Reservoir replacement keeps a uniform sample of everything seen.
            std::uniform_int_distribution<uint64_t> pick(0, total_inserted - 1);
            const uint64_t j = pick(rng);
            if (j < params.store_capacity) {
                world_points[j] = world;
                descriptors[j] = desc;
            }
        }
        tree_dirty = true;
    }
};

BaselineRelocaliser::BaselineRelocaliser(const BaselineRelocaliserParams& params)
    : impl_(std::make_unique<Impl>(params)) {}

BaselineRelocaliser::~BaselineRelocaliser() = default;

size_t BaselineRelocaliser::store_size() const { return impl_->world_points.size(); }

const std::vector<Eigen::Vector3d>& BaselineRelocaliser::world_points() const {
    return impl_->world_points;
}

void BaselineRelocaliser::train(const ColorImage& color, const DepthImage& depth,
                                const RigidTransform& pose, const CameraIntrinsics& k) {
    require_matches(depth, k);
    require_same_size(depth, color);
    for (const auto& f : impl_->sample_features(color, depth, k))
        impl_->insert(pose.apply(f.cam_point), f.descriptor);
    impl_->trained = true;
}

std::optional<RigidTransform> BaselineRelocaliser::relocalise(const ColorImage& color,
                                                              const DepthImage& depth,
                                                              const CameraIntrinsics& k,
                                                              const QueryContext*) {
    if (!impl_->trained || impl_->world_points.empty()) return std::nullopt;
    require_matches(depth, k);
    require_same_size(depth, color);

    if (impl_->tree_dirty) {
        impl_->tree.build(impl_->descriptors);
        impl_->tree_dirty = false;
    }

    const auto features = impl_->sample_features(color, depth, k);
    std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> correspondences;
    correspondences.reserve(features.size());
    for (const auto& f : features) {
        const int nn = impl_->tree.nearest(f.descriptor);
        if (nn >= 0) correspondences.emplace_back(f.cam_point, impl_->world_points[nn]);
    }

    KabschRansacParams rp = impl_->params.ransac;
    rp.seed = impl_->rng();
    const auto result = kabsch_ransac(correspondences, rp);
    if (!result || result->second < impl_->params.min_inliers) return std::nullopt;
    return result->first;
}

// ---------------------------------------------------------------------------
// Oracle
// ---------------------------------------------------------------------------

OracleRelocaliser::OracleRelocaliser(OracleConfig config)
    : config_(std::move(config)), rng_(config_.rng_seed) {}

void OracleRelocaliser::train(const ColorImage&, const DepthImage&, const RigidTransform&,
                              const CameraIntrinsics&) {
    ++trained_frames_;
}

std::optional<RigidTransform> OracleRelocaliser::relocalise(const ColorImage&, const DepthImage&,
                                                            const CameraIntrinsics&,
                                                            const QueryContext* context) {
    if (trained_frames_ == 0) return std::nullopt;
    if (!context || !config_.ground_truth_provider) return std::nullopt;
    const auto truth = config_.ground_truth_provider(*context);
    if (!truth) return std::nullopt;

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng_) < config_.failure_rate) return std::nullopt;

    auto random_axis = [&]() {
        std::normal_distribution<double> gauss(0.0, 1.0);
        Eigen::Vector3d a(gauss(rng_), gauss(rng_), gauss(rng_));
        const double n = a.norm();
        return n > 0.0 ? Eigen::Vector3d(a / n) : Eigen::Vector3d::UnitX();
    };

    Eigen::Vector3d dt;
    double angle_rad;
    Eigen::Vector3d axis;
    if (unit(rng_) < config_.outlier_rate) {
        // Gross outlier: uniform in a translation ball and rotation-angle interval.
        axis = random_axis();
        const double r = config_.outlier_magnitude_trans * std::cbrt(unit(rng_));
        dt = r * random_axis();
        angle_rad = unit(rng_) * config_.outlier_magnitude_rot_deg * M_PI / 180.0;
    } else {
        std::normal_distribution<double> gt(0.0, config_.inlier_noise_trans);
        std::normal_distribution<double> ga(0.0, config_.inlier_noise_rot_deg * M_PI / 180.0);
        dt = Eigen::Vector3d(gt(rng_), gt(rng_), gt(rng_));
        axis = random_axis();
        angle_rad = ga(rng_);
    }
    const RigidTransform delta_rot = RigidTransform::from_axis_angle(axis, angle_rad);
    // Left-perturb the rotation; add translation noise directly, so that
    // pose_distance(truth, result) == (|dt|, |angle|) exactly.
    return RigidTransform(delta_rot.rotation() * truth->rotation(), truth->translation() + dt);
}

}  // namespace collab
