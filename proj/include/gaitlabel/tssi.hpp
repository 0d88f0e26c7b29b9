#pragma once

#include <vector>

#include "gaitlabel/common.hpp"
#include "gaitlabel/skeleton.hpp"

namespace gaitlabel {

// Depth-first walk of the COCO-17 skeleton tree. Consecutive entries are
// always tree edges, so neighboring image rows belong to adjacent joints.
struct TraversalOrder {
  std::vector<int> indices;

  int length() const { return static_cast<int>(indices.size()); }
};

// The fixed walk rooted at the nose, length 33 (each of the 16 tree edges is
// crossed twice).
const TraversalOrder& coco17_traversal();

// Tree-structure skeleton image: rows follow the traversal, columns are
// resampled time steps, channels are (x, y, conf).
struct TssiImage {
  int rows = 0;  // traversal length
  int cols = 0;  // time steps
  std::vector<double> data;  // rows * cols * 3, row-major, channel fastest

  double& at(int r, int t, int c) { return data[(r * cols + t) * 3 + c]; }
  double at(int r, int t, int c) const { return data[(r * cols + t) * 3 + c]; }
};

inline constexpr int kDefaultTssiFrames = 60;

// Resamples to T frames and lays joint trajectories out along the traversal.
// The sequence must be normalized.
TssiImage encode_tssi(const SkeletonSequence& seq, int frames = kDefaultTssiFrames);

// Values fed to the classifier are clipped to this range and mapped to [0,1].
inline constexpr double kTssiClip = 3.0;

// Bilinear resize of one TSSI channel stack to a square model input.
// Output layout: 3 planes of side*side floats, channel-major.
std::vector<float> tssi_to_model_input(const TssiImage& img, int side);

// --- augmentations ---------------------------------------------------------

// Swaps left/right joint labels; coordinates untouched.
SkeletonSequence flip_lr(const SkeletonSequence& seq);

// x -> -x combined with a left/right label swap, so the result is a plausible
// skeleton. Expects a normalized sequence.
SkeletonSequence mirror_x(const SkeletonSequence& seq);

// Each joint-frame independently has probability p of being zeroed
// (coordinates and confidence). Deterministic given the generator state.
SkeletonSequence joint_dropout(const SkeletonSequence& seq, double p, Rng& rng);

// Temporal resampling to round(len/factor) frames; fps metadata scaled by
// factor. factor must lie in [0.5, 2].
SkeletonSequence pace_modify(const SkeletonSequence& seq, double factor);

// Contiguous window of the given length at a uniformly random start.
SkeletonSequence random_temporal_crop(const SkeletonSequence& seq, int len,
                                      Rng& rng);

struct AugmentOptions {
  double flip_prob = 0.5;
  double mirror_prob = 0.5;
  double dropout_prob = 0.5;      // probability of applying dropout at all
  double dropout_rate = 0.05;     // per joint-frame rate when applied
  double pace_prob = 0.5;
  double pace_min = 0.8;
  double pace_max = 1.25;
  double crop_prob = 0.5;
  double crop_fraction = 0.9;
};

// Random augmentation pipeline used at training time. Deterministic given the
// generator state.
SkeletonSequence augment_sequence(const SkeletonSequence& seq,
                                  const AugmentOptions& opts, Rng& rng);

}  // namespace gaitlabel
