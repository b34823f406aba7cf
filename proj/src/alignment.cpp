#include "collab/alignment.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <stdexcept>

namespace collab {

bool SampleCluster::admits(const RigidTransform& t) const {
    for (const auto& m : members)
        if (pose_distance(t, m.a_from_b).within(kClusterTransTol, kClusterRotTolDeg)) return true;
    return false;
}

bool PairClusterSet::add_sample(const RelativeTransformSample& sample) {
    if (sample.scene_a != scene_a_ || sample.scene_b != scene_b_)
        throw std::invalid_argument("sample pair does not match cluster set");
    ++sample_count_;

    SampleCluster* target = nullptr;
    for (auto& c : clusters_) {
        if (c.admits(sample.a_from_b)) {
            target = &c;
            break;
        }
    }
    if (!target) {
        clusters_.emplace_back();
        target = &clusters_.back();
    }
    target->members.push_back(sample);

    std::vector<RigidTransform> transforms;
    transforms.reserve(target->members.size());
    for (const auto& m : target->members) transforms.push_back(m.a_from_b);
    target->blended = dqb_blend(transforms);

    return target->members.size() >= static_cast<size_t>(kConfidenceThreshold);
}

std::optional<size_t> PairClusterSet::largest_cluster() const {
    if (clusters_.empty()) return std::nullopt;
    size_t best = 0;
    for (size_t i = 1; i < clusters_.size(); ++i)
        if (clusters_[i].members.size() > clusters_[best].members.size()) best = i;
    return best;
}

bool PairClusterSet::confident() const {
    const auto idx = largest_cluster();
    return idx && clusters_[*idx].members.size() >= static_cast<size_t>(kConfidenceThreshold);
}

SafetyMargin safety_margin(const PairClusterSet& set, const RigidTransform& /*ground_truth*/) {
    const auto correct_idx = set.largest_cluster();
    if (!correct_idx) throw std::invalid_argument("safety_margin: empty cluster set");

    SafetyMargin out;
    const auto& clusters = set.clusters();
    out.correct_size = clusters[*correct_idx].members.size();
    const RigidTransform& correct_blend = clusters[*correct_idx].blended;

    for (size_t i = 0; i < clusters.size(); ++i) {
        if (i == *correct_idx) continue;
        if (!pose_distance(clusters[i].blended, correct_blend)
                 .within(kClusterTransTol, kClusterRotTolDeg))
            out.largest_incorrect_size = std::max(out.largest_incorrect_size,
                                                  clusters[i].members.size());
    }
    out.margin = out.largest_incorrect_size > 0
                     ? static_cast<int64_t>(out.correct_size) -
                           static_cast<int64_t>(out.largest_incorrect_size)
                     : static_cast<int64_t>(out.correct_size);
    return out;
}

std::optional<PoseGraph> build_pose_graph(std::span<const PairClusterSet* const> sets,
                                          std::span<const int> scene_ids, int first_agent) {
    // Candidate graph G': every scene, one edge per confident pair.
    std::vector<PoseGraphEdge> all_edges;
    for (const auto* set : sets) {
        if (!set || !set->confident()) continue;
        const size_t idx = *set->largest_cluster();
        PoseGraphEdge e;
        e.scene_a = set->scene_a();
        e.scene_b = set->scene_b();
        e.a_from_b = set->clusters()[idx].blended;
        all_edges.push_back(e);
    }
    if (all_edges.empty()) return std::nullopt;

    // Connected component containing the first agent.
    std::set<int> component{first_agent};
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& e : all_edges) {
            const bool has_a = component.count(e.scene_a) > 0;
            const bool has_b = component.count(e.scene_b) > 0;
            if (has_a != has_b) {
                component.insert(has_a ? e.scene_b : e.scene_a);
                grew = true;
            }
        }
    }
    if (component.size() < 2) return std::nullopt;

    PoseGraph g;
    g.first_agent = first_agent;
    for (int id : scene_ids)
        if (component.count(id)) g.nodes.push_back(id);
    for (const auto& e : all_edges)
        if (component.count(e.scene_a) && component.count(e.scene_b)) g.edges.push_back(e);
    return g;
}

namespace {

PoseResidual edge_residual(const RigidTransform& pose_a, const RigidTransform& pose_b,
                           const RigidTransform& a_from_b) {
    return error_vector(compose(invert(pose_b), compose(pose_a, a_from_b)));
}

}  // namespace

double graph_error(const PoseGraph& graph) {
    double total = 0.0;
    for (const auto& e : graph.edges) {
        const auto ia = graph.poses.find(e.scene_a);
        const auto ib = graph.poses.find(e.scene_b);
        if (ia == graph.poses.end() || ib == graph.poses.end())
            throw std::invalid_argument("graph_error: node without a pose");
        total += edge_residual(ia->second, ib->second, e.a_from_b).norm();
    }
    return total;
}

std::map<int, RigidTransform> initial_poses(const PoseGraph& graph) {
    std::map<int, RigidTransform> poses;
    poses[graph.first_agent] = RigidTransform::identity();

    std::deque<int> frontier{graph.first_agent};
    while (!frontier.empty()) {
        const int node = frontier.front();
        frontier.pop_front();
        for (const auto& e : graph.edges) {
            int other = -1;
            RigidTransform next;
            if (e.scene_a == node && !poses.count(e.scene_b)) {
                // pose_b = pose_a * a_from_b satisfies the edge exactly.
                other = e.scene_b;
                next = compose(poses[node], e.a_from_b);
            } else if (e.scene_b == node && !poses.count(e.scene_a)) {
                other = e.scene_a;
                next = compose(poses[node], invert(e.a_from_b));
            }
            if (other >= 0) {
                poses[other] = next;
                frontier.push_back(other);
            }
        }
    }
    if (poses.size() != graph.nodes.size())
        throw std::invalid_argument("optimise: pose graph is not connected");
    return poses;
}

namespace {

/// Stacked per-edge residuals for the current pose assignment.
Eigen::VectorXd stacked_residuals(const PoseGraph& graph,
                                  const std::map<int, RigidTransform>& poses) {
    Eigen::VectorXd r(6 * graph.edges.size());
    for (size_t i = 0; i < graph.edges.size(); ++i) {
        const auto& e = graph.edges[i];
        const PoseResidual res = edge_residual(poses.at(e.scene_a), poses.at(e.scene_b),
                                               e.a_from_b);
        r.segment<3>(6 * i) = res.qvec;
        r.segment<3>(6 * i + 3) = res.tvec;
    }
    return r;
}

double eq5_error(const Eigen::VectorXd& r) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < r.size(); i += 6) total += r.segment<6>(i).norm();
    return total;
}

RigidTransform apply_increment(const RigidTransform& pose, const Eigen::Matrix<double, 6, 1>& d) {
    const RigidTransform inc = RigidTransform::from_rotation_vector(d.head<3>(), d.tail<3>());
    return compose(inc, pose);
}

}  // namespace

OptimisationReport optimise_from(PoseGraph& graph, const std::map<int, RigidTransform>& initial,
                                 const OptimiserParams& params) {
    std::map<int, RigidTransform> poses = initial;
    if (!poses.count(graph.first_agent))
        throw std::invalid_argument("optimise: initial poses missing the first agent");

    std::vector<int> free_nodes;
    for (int id : graph.nodes)
        if (id != graph.first_agent) free_nodes.push_back(id);

    OptimisationReport report;
    Eigen::VectorXd r = stacked_residuals(graph, poses);
    double error = eq5_error(r);
    report.initial_residual = error;
    report.final_residual = error;

    if (free_nodes.empty() || graph.edges.empty()) {
        graph.poses = poses;
        report.converged = true;
        return report;
    }

    const int n_params = 6 * static_cast<int>(free_nodes.size());
    const int n_res = static_cast<int>(r.size());
    double damping = params.initial_damping;

    for (int iter = 0; iter < params.max_iterations; ++iter) {
        report.iterations = iter + 1;

        // Numeric Jacobian by central differences on each local increment.
        Eigen::MatrixXd jac(n_res, n_params);
        for (size_t ni = 0; ni < free_nodes.size(); ++ni) {
            const int node = free_nodes[ni];
            const RigidTransform base = poses[node];
            for (int p = 0; p < 6; ++p) {
                Eigen::Matrix<double, 6, 1> d = Eigen::Matrix<double, 6, 1>::Zero();
                d(p) = params.jacobian_epsilon;
                poses[node] = apply_increment(base, d);
                const Eigen::VectorXd r_plus = stacked_residuals(graph, poses);
                d(p) = -params.jacobian_epsilon;
                poses[node] = apply_increment(base, d);
                const Eigen::VectorXd r_minus = stacked_residuals(graph, poses);
                poses[node] = base;
                jac.col(6 * ni + p) = (r_plus - r_minus) / (2.0 * params.jacobian_epsilon);
            }
        }

        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * r;

        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd damped = jtj;
            damped.diagonal().array() += damping;
            const Eigen::VectorXd step = damped.ldlt().solve(-jtr);

            if (step.norm() < params.min_step_norm) break;

            std::map<int, RigidTransform> trial = poses;
            for (size_t ni = 0; ni < free_nodes.size(); ++ni)
                trial[free_nodes[ni]] =
                    apply_increment(poses[free_nodes[ni]], step.segment<6>(6 * ni));

            const Eigen::VectorXd r_trial = stacked_residuals(graph, trial);
            const double error_trial = eq5_error(r_trial);
            if (error_trial < error) {
                poses = std::move(trial);
                r = r_trial;
                const double decrease = (error - error_trial) / std::max(error, 1e-300);
                error = error_trial;
                damping = std::max(damping * params.damping_down, 1e-12);
                accepted = true;
                if (decrease < params.min_relative_decrease) {
                    report.converged = true;
                    goto done;
                }
            } else {
                damping *= params.damping_up;
                if (damping > 1e12) break;  // no acceptable step in this direction
            }
        }
        if (!accepted) {
            report.converged = true;
            break;
        }
    }

done:
    report.final_residual = error;
    graph.poses = std::move(poses);
    return report;
}

OptimisationReport optimise(PoseGraph& graph, const OptimiserParams& params) {
    return optimise_from(graph, initial_poses(graph), params);
}

}  // namespace collab
