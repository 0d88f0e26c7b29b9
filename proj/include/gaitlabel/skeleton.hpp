#pragma once

#include <array>
#include <string>
#include <vector>

#include "gaitlabel/common.hpp"

namespace gaitlabel {

// COCO-17 keypoint order, as produced by 2D pose estimators.
enum CocoJoint : int {
  kNose = 0,
  kLeftEye = 1,
  kRightEye = 2,
  kLeftEar = 3,
  kRightEar = 4,
  kLeftShoulder = 5,
  kRightShoulder = 6,
  kLeftElbow = 7,
  kRightElbow = 8,
  kLeftWrist = 9,
  kRightWrist = 10,
  kLeftHip = 11,
  kRightHip = 12,
  kLeftKnee = 13,
  kRightKnee = 14,
  kLeftAnkle = 15,
  kRightAnkle = 16,
};

inline constexpr int kNumJoints = 17;

struct Joint {
  double x = 0.0;
  double y = 0.0;
  double conf = 0.0;  // detector confidence in [0,1]
};

struct SkeletonFrame {
  std::array<Joint, kNumJoints> joints{};
};

enum class Variation { WS, CB, CL, CBG, NM, BG, OTHER };

const char* to_string(Variation v);
Variation variation_from_string(const std::string& s);

inline constexpr int kAngleUnknown = -1;

struct SequenceMeta {
  std::string subject_id;
  int view_angle_deg = kAngleUnknown;  // 0,18,...,180 when known
  Variation variation = Variation::OTHER;
  std::string source_video;
};

struct SkeletonSequence {
  std::vector<SkeletonFrame> frames;
  double fps = 30.0;
  SequenceMeta meta;
  bool normalized = false;

  int length() const { return static_cast<int>(frames.size()); }
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Surrogates for joints COCO-17 does not provide: pelvis = hip midpoint,
// neck = shoulder midpoint.
struct DerivedAnchors {
  Vec2 pelvis;
  Vec2 neck;
  double shoulder_len = 0.0;  // Euclidean distance between shoulders
  double torso_len = 0.0;     // Euclidean distance pelvis -> neck
};

// Floor under both normalization denominators.
inline constexpr double kAnchorEps = 1e-6;

enum class AnchorMode {
  PerFrame,        // each frame normalized by its own anchor lengths
  SequenceMedian,  // shared median lengths; robust to near-profile views
};

struct NormalizeOptions {
  AnchorMode anchor_mode = AnchorMode::PerFrame;
};

// Throws AnchorDegenerate when either anchor length is below kAnchorEps.
DerivedAnchors derive_anchors(const SkeletonFrame& frame);

// Zero-centers on the pelvis, then divides x by the shoulder length and y by
// the torso length. Confidences pass through unchanged.
SkeletonFrame normalize_frame(const SkeletonFrame& frame);

// Per-frame normalization over the whole sequence. Degenerate frames are
// repaired by linear interpolation from the nearest valid neighbors
// (endpoints copy the nearest valid frame). Throws SequenceUnusable when more
// than half the frames are degenerate.
SkeletonSequence normalize_sequence(const SkeletonSequence& seq,
                                    const NormalizeOptions& opts = {});

// Linear interpolation of joints and confidences at target_len uniform time
// points spanning the original duration. First/last frames are preserved
// exactly; fps metadata is left untouched.
SkeletonSequence resample_sequence(const SkeletonSequence& seq, int target_len);

struct ValidationThresholds {
  double min_mean_conf = 0.3;
  double max_degenerate_fraction = 0.5;
  int min_frames = 10;
};

struct ValidationReport {
  int n_frames = 0;
  double duration_s = 0.0;
  double mean_conf = 0.0;
  std::array<double, kNumJoints> per_joint_mean_conf{};
  double degenerate_fraction = 0.0;
  bool empty = false;
  bool too_short = false;
  bool low_confidence = false;
  bool high_degeneracy = false;

  bool clean() const {
    return !(empty || too_short || low_confidence || high_degeneracy);
  }
};

ValidationReport validate_sequence(const SkeletonSequence& seq,
                                   const ValidationThresholds& thr = {});

}  // namespace gaitlabel
