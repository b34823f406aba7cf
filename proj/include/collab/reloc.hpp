#pragma once

#include "collab/image.hpp"
#include "collab/relocaliser.hpp"
#include "collab/se3.hpp"
#include "collab/volume.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace collab {

enum class ServerMode { kBatch, kInteractive };

/// An attempt to relocalise frame `source.frame_index` of scene
/// `source.scene` within `target_scene`'s coordinate system.
struct RelocCandidate {
    int target_scene = -1;  // a
    FrameRef source;        // f = (b, i)
};

struct CandidateScore {
    double phi_new = 0.0;    // {0, 1}
    double phi_conf = 0.0;   // >= 0
    double phi_homog = 0.0;  // {0, 5}
    double total = 0.0;      // phi_new - phi_conf - phi_homog
};

/// Outcome of masked depth-difference verification of a proposed pose.
struct VerificationReport {
    enum class Verdict { kAccepted, kRejectedCoverage, kRejectedDepthDiff, kRejectedEmptyOverlap };

    size_t omega_size = 0;   // |Omega|: all pixels
    size_t omega_a = 0;      // valid in the target render
    size_t omega_b = 0;      // valid in the source render
    size_t omega_ab = 0;     // valid in both
    double coverage_ratio = 0.0;                          // |Omega_a| / |Omega|
    double mu = std::numeric_limits<double>::quiet_NaN(); // defined iff omega_ab > 0
    Verdict verdict = Verdict::kRejectedEmptyOverlap;

    bool accepted() const { return verdict == Verdict::kAccepted; }
};

std::string to_string(VerificationReport::Verdict verdict);

/// One verified estimate of the transform mapping scene `scene_b` coordinates
/// into scene `scene_a` coordinates, held in canonical order (scene_a < scene_b).
struct RelativeTransformSample {
    int scene_a = -1;
    int scene_b = -1;
    RigidTransform a_from_b;
    FrameRef source;

    static RelativeTransformSample make(int a, int b, const RigidTransform& a_from_b,
                                        const FrameRef& source);
};

/// Append-only log of source poses tried per ordered (target, source) scene
/// pair; feeds the homogeneity penalty.
class AttemptLog {
public:
    void append(int target_scene, int source_scene, const RigidTransform& source_pose);
    const std::vector<RigidTransform>* attempts(int target_scene, int source_scene) const;
    size_t total() const { return total_; }

private:
    std::map<std::pair<int, int>, std::vector<RigidTransform>> log_;
    size_t total_ = 0;
};

/// Read-only view of the server state the scheduler needs. Thresholds and
/// cluster bookkeeping live behind this interface so the scoring logic can be
/// tested against hand-built states.
class PipelineState {
public:
    virtual ~PipelineState() = default;

    virtual std::vector<int> scene_ids() const = 0;
    virtual size_t trajectory_length(int scene) const = 0;
    virtual RigidTransform trajectory_pose(int scene, int frame_index) const = 0;
    virtual bool has_optimised_pose(int scene) const = 0;
    /// Sizes of all sample clusters for the unordered pair {a, b} (any order).
    virtual std::vector<size_t> cluster_sizes(int a, int b) const = 0;
    virtual const AttemptLog& attempt_log() const = 0;
};

inline constexpr int kCandidatesPerAttempt = 10;
inline constexpr int kConfidenceThreshold = 2;          // N
inline constexpr double kHomogTransThreshold = 0.05;    // meters
inline constexpr double kHomogRotThresholdDeg = 5.0;
inline constexpr double kHomogPenalty = 5.0;
inline constexpr uint64_t kInteractiveAttemptSpacing = 50;  // fused frames
inline constexpr double kCoverageThreshold = 0.5;       // strictly-greater required
inline constexpr double kDepthDiffThreshold = 0.05;     // meters, strictly-less required

/// Draws kCandidatesPerAttempt candidates: uniform over unordered scene pairs,
/// uniform direction, uniform frame index from the source trajectory.
/// Fewer than two scenes with frames yields an empty list.
std::vector<RelocCandidate> generate_candidates(const PipelineState& state, std::mt19937_64& rng);

CandidateScore score_candidate(const RelocCandidate& candidate, const PipelineState& state);

struct SchedulerStatus {
    uint64_t frames_fused_total = 0;
    uint64_t frames_fused_at_last_attempt = 0;
    bool all_streams_done = false;
};

/// Picks the best-scoring candidate, subject to the mode's pacing rule:
/// interactive mode requires >= 50 frames fused since the last attempt, batch
/// mode requires all client streams to have finished.
std::optional<RelocCandidate> schedule_attempt(const PipelineState& state, ServerMode mode,
                                               const SchedulerStatus& status,
                                               std::mt19937_64& rng);

/// Eq. 3/4-style comparison of the target-scene render against the source
/// render. Coverage below the threshold rejects before the depth difference
/// is even computed; both images must share dimensions.
VerificationReport verify_depth(const DepthImage& target_render, const DepthImage& source_render);

struct AttemptInputs {
    RelocCandidate candidate;
    RigidTransform source_pose;            // camera-to-source-scene, from b's trajectory
    const TsdfVolume* source_volume = nullptr;
    const TsdfVolume* target_volume = nullptr;
    Relocaliser* target_relocaliser = nullptr;
    CameraIntrinsics intrinsics;           // render resolution (client depth resolution)
};

struct AttemptResult {
    RelocCandidate candidate;
    CandidateScore score;
    RigidTransform source_pose;
    std::optional<RigidTransform> proposed_pose;     // camera-to-target-scene
    std::optional<VerificationReport> report;        // present iff a pose was proposed
    std::optional<RelativeTransformSample> sample;   // present iff accepted

    bool relocaliser_failed() const { return !proposed_pose.has_value(); }
    std::string verdict_string() const;
};

/// Renders the source scene at the known pose, asks the target scene's
/// relocaliser for a pose, verifies it by depth differencing, and on success
/// forms the relative transform sample. The attempted source pose is always
/// appended to the log, whatever the outcome.
AttemptResult attempt_relocalisation(const AttemptInputs& inputs, AttemptLog& log);

/// JSON-lines record of one attempt (for the evaluate tooling).
std::string attempt_record_json(const AttemptResult& result);

struct VerifierRecord {
    bool verified = false;  // verdict was accepted
    bool correct = false;   // proposal within tolerance of ground truth
};

struct VerifierMetrics {
    uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
    double precision = std::numeric_limits<double>::quiet_NaN();
    double recall = std::numeric_limits<double>::quiet_NaN();
    double specificity = std::numeric_limits<double>::quiet_NaN();
};

VerifierMetrics verifier_metrics(const std::vector<VerifierRecord>& records);

}  // namespace collab
