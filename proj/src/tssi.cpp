#include "gaitlabel/tssi.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace gaitlabel {

const TraversalOrder& coco17_traversal() {
  // nose -> left face -> right face -> left arm, left leg -> right arm,
  // right leg; every edge walked down and back up.
  static const TraversalOrder order{{
      kNose,      kLeftEye,      kLeftEar,      kLeftEye,   kNose,
      kRightEye,  kRightEar,     kRightEye,     kNose,      kLeftShoulder,
      kLeftElbow, kLeftWrist,    kLeftElbow,    kLeftShoulder, kLeftHip,
      kLeftKnee,  kLeftAnkle,    kLeftKnee,     kLeftHip,   kLeftShoulder,
      kNose,      kRightShoulder, kRightElbow,  kRightWrist, kRightElbow,
      kRightShoulder, kRightHip, kRightKnee,    kRightAnkle, kRightKnee,
      kRightHip,  kRightShoulder, kNose,
  }};
  return order;
}

TssiImage encode_tssi(const SkeletonSequence& seq, int frames) {
  if (!seq.normalized) throw Error("encode_tssi: sequence must be normalized");
  if (frames < 2) throw Error("encode_tssi: frames must be >= 2");

  const SkeletonSequence resampled = resample_sequence(seq, frames);
  const TraversalOrder& order = coco17_traversal();

  TssiImage img;
  img.rows = order.length();
  img.cols = frames;
  img.data.resize(static_cast<size_t>(img.rows) * img.cols * 3);
  for (int r = 0; r < img.rows; ++r) {
    const int j = order.indices[r];
    for (int t = 0; t < frames; ++t) {
      const Joint& joint = resampled.frames[t].joints[j];
      img.at(r, t, 0) = joint.x;
      img.at(r, t, 1) = joint.y;
      img.at(r, t, 2) = joint.conf;
    }
  }
  return img;
}

std::vector<float> tssi_to_model_input(const TssiImage& img, int side) {
  std::vector<float> out(static_cast<size_t>(3) * side * side);
  const double rscale = static_cast<double>(img.rows - 1) / (side - 1);
  const double cscale = static_cast<double>(img.cols - 1) / (side - 1);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < side; ++i) {
      const double src_r = i * rscale;
      const int r0 = std::min(static_cast<int>(src_r), img.rows - 2);
      const double fr = src_r - r0;
      for (int j = 0; j < side; ++j) {
        const double src_c = j * cscale;
        const int c0 = std::min(static_cast<int>(src_c), img.cols - 2);
        const double fc = src_c - c0;
        const double v00 = img.at(r0, c0, c);
        const double v01 = img.at(r0, c0 + 1, c);
        const double v10 = img.at(r0 + 1, c0, c);
        const double v11 = img.at(r0 + 1, c0 + 1, c);
        double v = v00 * (1 - fr) * (1 - fc) + v01 * (1 - fr) * fc +
                   v10 * fr * (1 - fc) + v11 * fr * fc;
        v = std::clamp(v, -kTssiClip, kTssiClip);
        out[(static_cast<size_t>(c) * side + i) * side + j] =
            static_cast<float>((v + kTssiClip) / (2.0 * kTssiClip));
      }
    }
  }
  return out;
}

namespace {

constexpr std::pair<int, int> kSidePairs[] = {
    {kLeftEye, kRightEye},   {kLeftEar, kRightEar},
    {kLeftShoulder, kRightShoulder}, {kLeftElbow, kRightElbow},
    {kLeftWrist, kRightWrist}, {kLeftHip, kRightHip},
    {kLeftKnee, kRightKnee}, {kLeftAnkle, kRightAnkle},
};

}  // namespace

SkeletonSequence flip_lr(const SkeletonSequence& seq) {
  SkeletonSequence out = seq;
  for (SkeletonFrame& f : out.frames) {
    for (const auto& [l, r] : kSidePairs) std::swap(f.joints[l], f.joints[r]);
  }
  return out;
}

SkeletonSequence mirror_x(const SkeletonSequence& seq) {
  SkeletonSequence out = flip_lr(seq);
  for (SkeletonFrame& f : out.frames) {
    for (Joint& j : f.joints) j.x = -j.x;
  }
  return out;
}

SkeletonSequence joint_dropout(const SkeletonSequence& seq, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw Error("joint_dropout: p must be in [0,1)");
  SkeletonSequence out = seq;
  for (SkeletonFrame& f : out.frames) {
    for (Joint& j : f.joints) {
      if (uniform01(rng) < p) {
        j.x = 0.0;
        j.y = 0.0;
        j.conf = 0.0;
      }
    }
  }
  return out;
}

SkeletonSequence pace_modify(const SkeletonSequence& seq, double factor) {
  if (factor < 0.5 || factor > 2.0) {
    throw Error("pace_modify: factor must lie in [0.5, 2]");
  }
  const int target =
      std::max(2, static_cast<int>(std::lround(seq.length() / factor)));
  SkeletonSequence out = resample_sequence(seq, target);
  out.fps = seq.fps * factor;
  return out;
}

SkeletonSequence random_temporal_crop(const SkeletonSequence& seq, int len,
                                      Rng& rng) {
  const int n = seq.length();
  if (len < 1 || len > n) throw Error("random_temporal_crop: bad length");
  const int start = static_cast<int>(uniform_index(rng, n - len + 1));
  SkeletonSequence out = seq;
  out.frames.assign(seq.frames.begin() + start, seq.frames.begin() + start + len);
  return out;
}

SkeletonSequence augment_sequence(const SkeletonSequence& seq,
                                  const AugmentOptions& opts, Rng& rng) {
  SkeletonSequence cur = seq;
  if (uniform01(rng) < opts.flip_prob) cur = flip_lr(cur);
  if (uniform01(rng) < opts.mirror_prob) cur = mirror_x(cur);
  if (uniform01(rng) < opts.pace_prob) {
    const double f = opts.pace_min + uniform01(rng) * (opts.pace_max - opts.pace_min);
    cur = pace_modify(cur, f);
  }
  if (uniform01(rng) < opts.crop_prob) {
    const int len = std::max(2, static_cast<int>(std::lround(
                                    cur.length() * opts.crop_fraction)));
    if (len < cur.length()) cur = random_temporal_crop(cur, len, rng);
  }
  if (uniform01(rng) < opts.dropout_prob) {
    cur = joint_dropout(cur, opts.dropout_rate, rng);
  }
  return cur;
}

}  // namespace gaitlabel
