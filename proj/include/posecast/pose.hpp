#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "posecast/tensor.hpp"

namespace posecast {

// Skeleton topology: a joint tree with exactly one root (parent -1).
struct Skeleton {
    std::vector<std::string> joint_names;
    std::vector<int> parent_index;

    int num_joints() const { return static_cast<int>(joint_names.size()); }
    void validate() const;
    bool operator==(const Skeleton&) const = default;

    // The canonical 8-joint stick figure used by the synthetic generator.
    static Skeleton canonical8();
};

// Rest pose (J x 3, mm) of the canonical 8-joint skeleton.
MotionMatrix canonical8_rest_pose();

// A timed series of 3D skeleton poses, coordinates in millimeters.
struct PoseSequence {
    Skeleton skeleton;
    double fps = 25.0;
    FrameMatrix frames;  // num_frames x 3J

    int num_frames() const { return static_cast<int>(frames.rows()); }
    void validate() const;
};

// An (observation window, future window) pair cut from one sequence.
struct ForecastSample {
    FrameMatrix observed;  // O x 3J
    FrameMatrix future;    // T x 3J
    std::string source_id;
    std::optional<int> family_label;

    int observed_frames() const { return static_cast<int>(observed.rows()); }
    int future_frames() const { return static_cast<int>(future.rows()); }
    int num_joints() const { return static_cast<int>(observed.cols()) / 3; }
};

// Parameters of one synthetic motion family: per-joint sinusoids on top of
// the rest pose plus a linear drift and white observation noise.
struct MotionFamilySpec {
    int family_id = 0;
    MotionMatrix amplitude_mm;      // J x 3, >= 0
    VectorXd frequency_hz;          // J, > 0
    VectorXd phase_rad;             // J
    Eigen::Vector3d drift_mm_per_s = Eigen::Vector3d::Zero();
    double noise_std_mm = 0.0;

    int num_joints() const { return static_cast<int>(amplitude_mm.rows()); }
    void validate() const;
};

// Cuts every contiguous (O, T) split at offsets 0, stride, 2*stride, ...
// Returns an empty list when the sequence is shorter than O + T.
std::vector<ForecastSample> window(const PoseSequence& seq, int observed, int future,
                                   int stride, const std::string& source_name = "seq",
                                   std::optional<int> family_label = std::nullopt);

// poseseq v1 file format: one newline-terminated JSON header line followed by
// num_frames * J * 3 little-endian float32 values in (frame, joint, xyz) order.
void write_sequence(const PoseSequence& seq, const std::string& path);
PoseSequence read_sequence(const std::string& path);

// joint j trajectory = rest[j] + amplitude[j] .* sin(2*pi*freq[j]*t + phase[j])
//                      + drift*t + N(0, noise_std^2), with t in seconds.
// Deterministic given (spec, num_frames, seed).
PoseSequence generate_family(const MotionFamilySpec& spec, int num_frames, std::uint64_t seed,
                             const Skeleton& skeleton, const MotionMatrix& rest_pose,
                             double fps = 25.0);
PoseSequence generate_family(const MotionFamilySpec& spec, int num_frames, std::uint64_t seed);

// Permutes the time axis of the future window uniformly at random.
ForecastSample shuffle_frames(const ForecastSample& sample, std::uint64_t seed);
// Applies one random joint permutation to every frame of the future window.
ForecastSample shuffle_joints(const ForecastSample& sample, std::uint64_t seed);

// The same permutations applied to a bare motion tensor (T x 3J).
FrameMatrix shuffle_frames_motion(const FrameMatrix& motion, std::uint64_t seed);
FrameMatrix shuffle_joints_motion(const FrameMatrix& motion, std::uint64_t seed);

}  // namespace posecast
