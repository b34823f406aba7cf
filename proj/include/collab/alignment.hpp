#pragma once

#include "collab/reloc.hpp"
#include "collab/se3.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace collab {

inline constexpr double kClusterTransTol = 0.10;    // meters
inline constexpr double kClusterRotTolDeg = 20.0;

/// A group of mutually consistent relative-transform samples for one scene
/// pair, with their dual-quaternion blend cached.
struct SampleCluster {
    std::vector<RelativeTransformSample> members;
    RigidTransform blended;

    /// True if `t` is within the cluster tolerance of any existing member.
    bool admits(const RigidTransform& t) const;
};

/// All clusters for one canonical scene pair, in creation order. Samples join
/// the first cluster (creation order) with any member within tolerance, else
/// found a new cluster (single linkage, incremental).
class PairClusterSet {
public:
    PairClusterSet() = default;
    PairClusterSet(int scene_a, int scene_b) : scene_a_(scene_a), scene_b_(scene_b) {}

    int scene_a() const { return scene_a_; }
    int scene_b() const { return scene_b_; }
    const std::vector<SampleCluster>& clusters() const { return clusters_; }
    size_t sample_count() const { return sample_count_; }

    /// Adds a sample; returns true when the receiving cluster now has at
    /// least kConfidenceThreshold members (i.e. optimisation is worthwhile).
    bool add_sample(const RelativeTransformSample& sample);

    /// Index of the largest cluster (ties broken by creation order), or
    /// nothing when the set is empty.
    std::optional<size_t> largest_cluster() const;

    /// True when the largest cluster has >= kConfidenceThreshold members.
    bool confident() const;

private:
    int scene_a_ = -1, scene_b_ = -1;
    std::vector<SampleCluster> clusters_;
    size_t sample_count_ = 0;
};

/// Size of the "correct" (largest) cluster, of the largest cluster whose
/// blend disagrees with it beyond the cluster tolerance, and the margin
/// between the two. With no disagreeing cluster, the margin is the correct
/// cluster's full size.
struct SafetyMargin {
    size_t correct_size = 0;
    size_t largest_incorrect_size = 0;
    int64_t margin = 0;
};

/// `ground_truth` is the evaluation-time true relative transform; it is
/// reported alongside so callers can sanity-check the largest cluster, but
/// the margin itself follows the largest-cluster convention.
SafetyMargin safety_margin(const PairClusterSet& set, const RigidTransform& ground_truth);

struct PoseGraphEdge {
    int scene_a = -1, scene_b = -1;  // canonical: scene_a < scene_b
    RigidTransform a_from_b;         // blend of the pair's largest cluster
};

/// Confident-edge pose graph: the connected component (containing the first
/// agent) of the graph with one blended edge per confident scene pair.
struct PoseGraph {
    int first_agent = -1;
    std::vector<int> nodes;
    std::vector<PoseGraphEdge> edges;
    std::map<int, RigidTransform> poses;  // scene -> global pose (scene-to-global)
};

/// Builds the pose graph from the per-pair cluster sets, or nothing when the
/// first agent's component contains no other node.
std::optional<PoseGraph> build_pose_graph(std::span<const PairClusterSet* const> sets,
                                          std::span<const int> scene_ids, int first_agent);

/// Eq.-5-style total error: sum over edges of the residual-vector norm of
/// pose_b^-1 * pose_a * a_from_b.
double graph_error(const PoseGraph& graph);

struct OptimiserParams {
    double initial_damping = 1e-4;
    double damping_up = 10.0;     // on rejected step
    double damping_down = 0.1;    // on accepted step
    int max_iterations = 100;
    double min_step_norm = 1e-8;
    double min_relative_decrease = 1e-10;
    double jacobian_epsilon = 1e-6;
};

struct OptimisationReport {
    double initial_residual = 0.0;
    double final_residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Breadth-first initialisation from the first agent, then Levenberg-
/// Marquardt with numeric Jacobians over 6-parameter local increments
/// (rotation vector + translation) per free node; the first agent stays
/// pinned to the identity. Steps are only accepted when the Eq.-5 error
/// decreases, so final_residual <= initial_residual always.
OptimisationReport optimise(PoseGraph& graph, const OptimiserParams& params = {});

/// Variant with caller-supplied starting poses (testing hook; `optimise`
/// itself always starts from the breadth-first composition).
OptimisationReport optimise_from(PoseGraph& graph, const std::map<int, RigidTransform>& initial,
                                 const OptimiserParams& params = {});

/// The breadth-first initial poses on their own (first agent = identity).
std::map<int, RigidTransform> initial_poses(const PoseGraph& graph);

}  // namespace collab
