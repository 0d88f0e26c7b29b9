#pragma once

#include <string>
#include <vector>

#include "gaitlabel/common.hpp"
#include "gaitlabel/face.hpp"
#include "gaitlabel/manifest.hpp"
#include "gaitlabel/skeleton.hpp"

namespace gaitlabel {

// One walking style, mapped to a class label. Styles differ in how much the
// arms swing and how far apart the feet track.
struct SynthStyle {
  double arm_swing_amplitude = 0.25;  // radians
  double stride_width = 0.16;         // meters between foot tracks
  GenderLabel label = GenderLabel::FEMALE;
};

struct SynthConfig {
  int subjects_per_style = 20;
  std::vector<SynthStyle> styles = {
      {0.1, 0.22, GenderLabel::FEMALE},
      {0.4, 0.10, GenderLabel::MALE},
  };
  std::vector<int> angles = {0, 18, 36, 54, 72, 90, 108, 126, 144, 162, 180};
  int frames = 60;
  double noise_std = 0.02;  // gaussian jitter in walker units before projection
  double fps = 30.0;
  std::uint64_t seed = 0;
};

struct SynthDataset {
  DatasetManifest manifest;               // entries carry ground-truth labels
  std::vector<SkeletonSequence> sequences;  // raw (unnormalized), manifest order
};

// Parametric 3D stick walker with sinusoidal limb oscillation, rotated to
// each requested view angle and orthographically projected into image
// coordinates. Deterministic given the seed. Subject kinematics are drawn per
// subject, so the same subject seen from two angles moves identically.
SynthDataset generate_synthetic_dataset(const SynthConfig& cfg);

// Writes pose files under <dir>/poses/, the manifest to <dir>/manifest.tsv
// and a subject ground-truth sidecar to <dir>/labels.tsv.
void write_synthetic_dataset(const SynthDataset& dataset, const std::string& dir);

// Synthesizes face-analysis traces for the front-view entries of a manifest,
// one fixture file per sequence, with controllable label corruption. Useful
// for exercising the face-annotation path without a live analyzer.
struct FaceFixtureOptions {
  double flip_prob = 0.0;     // probability a video's trace points the wrong way
  double score_margin = 0.3;  // distance of gender scores from 0.5
  double score_noise = 0.1;
  int observations = 5;
  double det_conf = 0.97;
  std::uint64_t seed = 0;
};

void write_face_fixtures(const DatasetManifest& manifest, const std::string& dir,
                         const FaceFixtureOptions& opts);

}  // namespace gaitlabel
