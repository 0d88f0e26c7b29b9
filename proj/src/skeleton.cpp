#include "gaitlabel/skeleton.hpp"

#include <algorithm>
#include <cmath>

namespace gaitlabel {

const char* to_string(Variation v) {
  switch (v) {
    case Variation::WS: return "WS";
    case Variation::CB: return "CB";
    case Variation::CL: return "CL";
    case Variation::CBG: return "CBG";
    case Variation::NM: return "NM";
    case Variation::BG: return "BG";
    case Variation::OTHER: return "OTHER";
  }
  return "OTHER";
}

Variation variation_from_string(const std::string& s) {
  if (s == "WS") return Variation::WS;
  if (s == "CB") return Variation::CB;
  if (s == "CL") return Variation::CL;
  if (s == "CBG") return Variation::CBG;
  if (s == "NM") return Variation::NM;
  if (s == "BG") return Variation::BG;
  return Variation::OTHER;
}

namespace {

double dist(const Joint& a, const Joint& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

struct FrameAnchors {
  DerivedAnchors anchors;
  bool degenerate = false;
};

FrameAnchors compute_anchors(const SkeletonFrame& frame) {
  const Joint& lh = frame.joints[kLeftHip];
  const Joint& rh = frame.joints[kRightHip];
  const Joint& ls = frame.joints[kLeftShoulder];
  const Joint& rs = frame.joints[kRightShoulder];

  FrameAnchors out;
  out.anchors.pelvis = {(lh.x + rh.x) / 2.0, (lh.y + rh.y) / 2.0};
  out.anchors.neck = {(ls.x + rs.x) / 2.0, (ls.y + rs.y) / 2.0};
  out.anchors.shoulder_len = dist(ls, rs);
  out.anchors.torso_len = std::hypot(out.anchors.neck.x - out.anchors.pelvis.x,
                                     out.anchors.neck.y - out.anchors.pelvis.y);
  out.degenerate = out.anchors.shoulder_len < kAnchorEps ||
                   out.anchors.torso_len < kAnchorEps;
  return out;
}

SkeletonFrame normalize_with(const SkeletonFrame& frame, const Vec2& pelvis,
                             double shoulder_len, double torso_len) {
  SkeletonFrame out = frame;
  for (Joint& j : out.joints) {
    j.x = (j.x - pelvis.x) / shoulder_len;
    j.y = (j.y - pelvis.y) / torso_len;
  }
  return out;
}

}  // namespace

DerivedAnchors derive_anchors(const SkeletonFrame& frame) {
  FrameAnchors fa = compute_anchors(frame);
  if (fa.degenerate) {
    throw AnchorDegenerate("degenerate anchors: shoulder_len=" +
                           std::to_string(fa.anchors.shoulder_len) +
                           " torso_len=" + std::to_string(fa.anchors.torso_len));
  }
  return fa.anchors;
}

SkeletonFrame normalize_frame(const SkeletonFrame& frame) {
  DerivedAnchors a = derive_anchors(frame);
  return normalize_with(frame, a.pelvis, a.shoulder_len, a.torso_len);
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

SkeletonFrame lerp_frames(const SkeletonFrame& a, const SkeletonFrame& b,
                          double t) {
  SkeletonFrame out;
  for (int j = 0; j < kNumJoints; ++j) {
    out.joints[j].x = a.joints[j].x + (b.joints[j].x - a.joints[j].x) * t;
    out.joints[j].y = a.joints[j].y + (b.joints[j].y - a.joints[j].y) * t;
    out.joints[j].conf =
        a.joints[j].conf + (b.joints[j].conf - a.joints[j].conf) * t;
  }
  return out;
}

}  // namespace

SkeletonSequence normalize_sequence(const SkeletonSequence& seq,
                                    const NormalizeOptions& opts) {
  const int n = seq.length();
  if (n < 1) throw SequenceUnusable("empty sequence");

  std::vector<FrameAnchors> anchors(n);
  for (int i = 0; i < n; ++i) anchors[i] = compute_anchors(seq.frames[i]);

  SkeletonSequence out = seq;
  out.normalized = true;

  if (opts.anchor_mode == AnchorMode::SequenceMedian) {
    std::vector<double> sh, to;
    sh.reserve(n);
    to.reserve(n);
    for (const FrameAnchors& fa : anchors) {
      sh.push_back(fa.anchors.shoulder_len);
      to.push_back(fa.anchors.torso_len);
    }
    const double med_sh = median_of(sh);
    const double med_to = median_of(to);
    if (med_sh < kAnchorEps || med_to < kAnchorEps) {
      throw SequenceUnusable("median anchor lengths degenerate");
    }
    for (int i = 0; i < n; ++i) {
      out.frames[i] = normalize_with(seq.frames[i], anchors[i].anchors.pelvis,
                                     med_sh, med_to);
    }
    return out;
  }

  int degenerate_count = 0;
  std::vector<bool> valid(n);
  for (int i = 0; i < n; ++i) {
    valid[i] = !anchors[i].degenerate;
    if (!valid[i]) ++degenerate_count;
  }
  if (degenerate_count * 2 > n) {
    throw SequenceUnusable("more than half of the frames have degenerate anchors (" +
                           std::to_string(degenerate_count) + "/" +
                           std::to_string(n) + ")");
  }

  for (int i = 0; i < n; ++i) {
    if (valid[i]) {
      out.frames[i] =
          normalize_with(seq.frames[i], anchors[i].anchors.pelvis,
                         anchors[i].anchors.shoulder_len,
                         anchors[i].anchors.torso_len);
    }
  }

  // Repair degenerate frames from the nearest valid neighbors.
  for (int i = 0; i < n; ++i) {
    if (valid[i]) continue;
    int prev = i - 1;
    while (prev >= 0 && !valid[prev]) --prev;
    int next = i + 1;
    while (next < n && !valid[next]) ++next;

    if (prev >= 0 && next < n) {
      const double t = static_cast<double>(i - prev) / (next - prev);
      out.frames[i] = lerp_frames(out.frames[prev], out.frames[next], t);
    } else if (prev >= 0) {
      out.frames[i] = out.frames[prev];
    } else {
      out.frames[i] = out.frames[next];
    }
  }
  return out;
}

SkeletonSequence resample_sequence(const SkeletonSequence& seq, int target_len) {
  const int n = seq.length();
  if (n < 1) throw SequenceUnusable("empty sequence");
  if (target_len < 2) throw Error("resample_sequence: target_len must be >= 2");

  SkeletonSequence out = seq;
  out.frames.assign(target_len, SkeletonFrame{});
  for (int i = 0; i < target_len; ++i) {
    if (n == 1) {
      out.frames[i] = seq.frames[0];
      continue;
    }
    const double t = static_cast<double>(i) * (n - 1) / (target_len - 1);
    const int i0 = std::min(static_cast<int>(t), n - 2);
    const double frac = t - i0;
    out.frames[i] = lerp_frames(seq.frames[i0], seq.frames[i0 + 1], frac);
  }
  return out;
}

ValidationReport validate_sequence(const SkeletonSequence& seq,
                                   const ValidationThresholds& thr) {
  ValidationReport rep;
  rep.n_frames = seq.length();
  if (rep.n_frames == 0) {
    rep.empty = true;
    rep.too_short = true;
    return rep;
  }
  rep.duration_s = seq.fps > 0 ? rep.n_frames / seq.fps : 0.0;

  double total = 0.0;
  int degenerate = 0;
  for (const SkeletonFrame& f : seq.frames) {
    for (int j = 0; j < kNumJoints; ++j) {
      rep.per_joint_mean_conf[j] += f.joints[j].conf;
      total += f.joints[j].conf;
    }
    if (compute_anchors(f).degenerate) ++degenerate;
  }
  for (double& c : rep.per_joint_mean_conf) c /= rep.n_frames;
  rep.mean_conf = total / (rep.n_frames * kNumJoints);
  rep.degenerate_fraction = static_cast<double>(degenerate) / rep.n_frames;

  rep.too_short = rep.n_frames < thr.min_frames;
  rep.low_confidence = rep.mean_conf < thr.min_mean_conf;
  rep.high_degeneracy = rep.degenerate_fraction > thr.max_degenerate_fraction;
  return rep;
}

}  // namespace gaitlabel
