#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gaitlabel/common.hpp"
#include "gaitlabel/face.hpp"
#include "gaitlabel/skeleton.hpp"

namespace gaitlabel {

enum class Split { TRAIN, VAL, UNASSIGNED };

const char* to_string(Split s);
Split split_from_string(const std::string& s);

struct ManifestEntry {
  std::string sequence_id;
  std::string pose_path;  // relative to the manifest location
  std::string subject_id;
  int view_angle_deg = kAngleUnknown;
  Variation variation = Variation::OTHER;
  std::optional<PseudoLabel> label;
  Split split = Split::UNASSIGNED;
};

// Catalog binding sequences, labels, label provenance and splits. Stored as a
// tab-separated file with a version header; the root seed of the run that
// produced it travels with it.
struct DatasetManifest {
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;
};

void write_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& path);

// Serialized form, for byte-level idempotence checks.
std::string manifest_to_string(const DatasetManifest& manifest);

// --- pose files -------------------------------------------------------------

// Pose files carry per-frame COCO-17 keypoints of the people visible in each
// frame, shaped like 2D pose-estimator output:
//   {"fps": 30.0, "normalized": false,
//    "frames": [{"frame_index": 0,
//                "people": [{"keypoints": [x,y,c, ... 17 triples],
//                            "box": [x,y,w,h]}]}]}
// Frames are sorted by index on load; when several people are present the
// largest bounding box wins. Throws WrongKeypointCount for malformed people
// and ParseError with file context otherwise.
SkeletonSequence load_pose_sequence(const std::string& path);

void save_pose_sequence(const std::string& path, const SkeletonSequence& seq);

}  // namespace gaitlabel
