#include "collab/reloc.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace collab {

std::string to_string(VerificationReport::Verdict verdict) {
    switch (verdict) {
        case VerificationReport::Verdict::kAccepted: return "accepted";
        case VerificationReport::Verdict::kRejectedCoverage: return "rejected_coverage";
        case VerificationReport::Verdict::kRejectedDepthDiff: return "rejected_depth_diff";
        case VerificationReport::Verdict::kRejectedEmptyOverlap: return "rejected_empty_overlap";
    }
    return "unknown";
}

RelativeTransformSample RelativeTransformSample::make(int a, int b, const RigidTransform& a_from_b,
                                                      const FrameRef& source) {
    RelativeTransformSample s;
    s.source = source;
    if (a <= b) {
        s.scene_a = a;
        s.scene_b = b;
        s.a_from_b = a_from_b;
    } else {
        s.scene_a = b;
        s.scene_b = a;
        s.a_from_b = invert(a_from_b);
    }
    return s;
}

void AttemptLog::append(int target_scene, int source_scene, const RigidTransform& source_pose) {
    log_[{target_scene, source_scene}].push_back(source_pose);
    ++total_;
}

const std::vector<RigidTransform>* AttemptLog::attempts(int target_scene, int source_scene) const {
    const auto it = log_.find({target_scene, source_scene});
    return it == log_.end() ? nullptr : &it->second;
}

std::vector<RelocCandidate> generate_candidates(const PipelineState& state, std::mt19937_64& rng) {
    std::vector<int> scenes;
    for (int id : state.scene_ids())
        if (state.trajectory_length(id) > 0) scenes.push_back(id);
    if (scenes.size() < 2) return {};

    std::vector<std::pair<int, int>> pairs;
    for (size_t i = 0; i < scenes.size(); ++i)
        for (size_t j = i + 1; j < scenes.size(); ++j) pairs.emplace_back(scenes[i], scenes[j]);

    std::uniform_int_distribution<size_t> pick_pair(0, pairs.size() - 1);
    std::uniform_int_distribution<int> pick_dir(0, 1);

    std::vector<RelocCandidate> out;
    out.reserve(kCandidatesPerAttempt);
    for (int n = 0; n < kCandidatesPerAttempt; ++n) {
        const auto& [p, q] = pairs[pick_pair(rng)];
        RelocCandidate c;
        if (pick_dir(rng) == 0) {
            c.target_scene = p;
            c.source.scene = q;
        } else {
            c.target_scene = q;
            c.source.scene = p;
        }
        std::uniform_int_distribution<int> pick_frame(
            0, static_cast<int>(state.trajectory_length(c.source.scene)) - 1);
        c.source.frame_index = pick_frame(rng);
        out.push_back(c);
    }
    return out;
}

CandidateScore score_candidate(const RelocCandidate& candidate, const PipelineState& state) {
    CandidateScore score;
    const int a = candidate.target_scene;
    const int b = candidate.source.scene;

    const bool a_posed = state.has_optimised_pose(a);
    const bool b_posed = state.has_optimised_pose(b);
    score.phi_new = (a_posed != b_posed) ? 1.0 : 0.0;

    double conf = 0.0;
    for (size_t size : state.cluster_sizes(a, b))
        conf = std::max(conf, static_cast<double>(size) - kConfidenceThreshold);
    score.phi_conf = std::max(0.0, conf);

    score.phi_homog = 0.0;
    if (const auto* tried = state.attempt_log().attempts(a, b)) {
        const RigidTransform pose = state.trajectory_pose(b, candidate.source.frame_index);
        for (const auto& prev : *tried) {
            if (pose_distance(pose, prev).strictly_within(kHomogTransThreshold,
                                                          kHomogRotThresholdDeg)) {
                score.phi_homog = kHomogPenalty;
                break;
            }
        }
    }

    score.total = score.phi_new - score.phi_conf - score.phi_homog;
    return score;
}

std::optional<RelocCandidate> schedule_attempt(const PipelineState& state, ServerMode mode,
                                               const SchedulerStatus& status,
                                               std::mt19937_64& rng) {
    if (mode == ServerMode::kInteractive) {
        if (status.frames_fused_total - status.frames_fused_at_last_attempt <
            kInteractiveAttemptSpacing)
            return std::nullopt;
    } else {
        if (!status.all_streams_done) return std::nullopt;
    }

    const auto candidates = generate_candidates(state, rng);
    if (candidates.empty()) return std::nullopt;

    size_t best = 0;
    double best_total = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < candidates.size(); ++i) {
        const double total = score_candidate(candidates[i], state).total;
        if (total > best_total) {
            best_total = total;
            best = i;
        }
    }
    return candidates[best];
}

VerificationReport verify_depth(const DepthImage& target_render, const DepthImage& source_render) {
    if (target_render.width != source_render.width ||
        target_render.height != source_render.height)
        throw std::invalid_argument("verify_depth: image dimension mismatch");

    VerificationReport r;
    r.omega_size = target_render.count();
    double abs_diff_sum = 0.0;
    for (size_t i = 0; i < r.omega_size; ++i) {
        const float da = target_render.pixels[i];
        const float db = source_render.pixels[i];
        const bool va = da > 0.0f, vb = db > 0.0f;
        r.omega_a += va;
        r.omega_b += vb;
        if (va && vb) {
            ++r.omega_ab;
            abs_diff_sum += std::abs(static_cast<double>(da) - db);
        }
    }
    r.coverage_ratio = r.omega_size > 0 ? static_cast<double>(r.omega_a) / r.omega_size : 0.0;

    if (!(r.coverage_ratio > kCoverageThreshold)) {
        r.verdict = VerificationReport::Verdict::kRejectedCoverage;
        return r;
    }
    if (r.omega_ab == 0) {
        r.verdict = VerificationReport::Verdict::kRejectedEmptyOverlap;
        return r;
    }
    r.mu = abs_diff_sum / static_cast<double>(r.omega_ab);
    r.verdict = r.mu < kDepthDiffThreshold ? VerificationReport::Verdict::kAccepted
                                           : VerificationReport::Verdict::kRejectedDepthDiff;
    return r;
}

AttemptResult attempt_relocalisation(const AttemptInputs& inputs, AttemptLog& log) {
    AttemptResult result;
    result.candidate = inputs.candidate;
    result.source_pose = inputs.source_pose;

    const int a = inputs.candidate.target_scene;
    const int b = inputs.candidate.source.scene;
    log.append(a, b, inputs.source_pose);

    auto [source_depth, source_color] = inputs.source_volume->raycast(inputs.source_pose,
                                                                      inputs.intrinsics);

    QueryContext ctx;
    ctx.target_scene = a;
    ctx.source_scene = b;
    ctx.source_frame_index = inputs.candidate.source.frame_index;
    ctx.source_pose = inputs.source_pose;
    result.proposed_pose = inputs.target_relocaliser->relocalise(source_color, source_depth,
                                                                 inputs.intrinsics, &ctx);
    if (!result.proposed_pose) return result;

    auto [target_depth, target_color] =
        inputs.target_volume->raycast(*result.proposed_pose, inputs.intrinsics);
    result.report = verify_depth(target_depth, source_depth);
    if (!result.report->accepted()) return result;

    // fTa and fTb are camera-to-scene poses of the same physical viewpoint,
    // so the b-to-a map is fTa composed with fTb's inverse.
    const RigidTransform a_from_b = compose(*result.proposed_pose, invert(inputs.source_pose));
    result.sample = RelativeTransformSample::make(a, b, a_from_b, inputs.candidate.source);
    return result;
}

std::string AttemptResult::verdict_string() const {
    if (!proposed_pose) return "failed";
    return to_string(report->verdict);
}

std::string attempt_record_json(const AttemptResult& result) {
    nlohmann::json j;
    j["target"] = result.candidate.target_scene;
    j["source"] = result.candidate.source.scene;
    j["frame"] = result.candidate.source.frame_index;
    j["score"] = {{"phi_new", result.score.phi_new},
                  {"phi_conf", result.score.phi_conf},
                  {"phi_homog", result.score.phi_homog},
                  {"total", result.score.total}};
    j["verdict"] = result.verdict_string();
    if (result.report) {
        j["coverage"] = result.report->coverage_ratio;
        j["omega"] = result.report->omega_size;
        j["omega_a"] = result.report->omega_a;
        j["omega_b"] = result.report->omega_b;
        j["omega_ab"] = result.report->omega_ab;
        if (result.report->omega_ab > 0) j["mu"] = result.report->mu;
    }
    if (result.proposed_pose) {
        const int a = result.candidate.target_scene;
        const int b = result.candidate.source.scene;
        // Canonical-direction relative transform implied by the proposal,
        // recorded for all proposals so rejected ones can be labelled too.
        RigidTransform a_from_b = compose(*result.proposed_pose, invert(result.source_pose));
        const auto canonical = RelativeTransformSample::make(a, b, a_from_b,
                                                             result.candidate.source);
        j["pair"] = {canonical.scene_a, canonical.scene_b};
        j["pair_transform"] = canonical.a_from_b.coeffs();
    }
    return j.dump();
}

VerifierMetrics verifier_metrics(const std::vector<VerifierRecord>& records) {
    VerifierMetrics m;
    for (const auto& r : records) {
        if (r.verified && r.correct) ++m.tp;
        else if (r.verified && !r.correct) ++m.fp;
        else if (!r.verified && !r.correct) ++m.tn;
        else ++m.fn;
    }
    if (m.tp + m.fp > 0) m.precision = 100.0 * m.tp / static_cast<double>(m.tp + m.fp);
    if (m.tp + m.fn > 0) m.recall = 100.0 * m.tp / static_cast<double>(m.tp + m.fn);
    if (m.tn + m.fp > 0) m.specificity = 100.0 * m.tn / static_cast<double>(m.tn + m.fp);
    return m;
}

}  // namespace collab
