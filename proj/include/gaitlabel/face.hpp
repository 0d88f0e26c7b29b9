#pragma once

#include <string>
#include <vector>

#include "gaitlabel/common.hpp"

namespace gaitlabel {

enum class GenderLabel { FEMALE = 0, MALE = 1 };

const char* to_string(GenderLabel g);
GenderLabel gender_from_string(const std::string& s);

enum class LabelSource { GROUND_TRUTH, FACE, PROPAGATED };

const char* to_string(LabelSource s);
LabelSource label_source_from_string(const std::string& s);

struct PseudoLabel {
  GenderLabel label = GenderLabel::FEMALE;
  double score = 0.0;  // aggregated probability of the assigned class setup, in [0,1]
  LabelSource source = LabelSource::GROUND_TRUTH;
};

// One face detection in one video frame.
struct FaceObservation {
  int frame_index = 0;
  double x = 0.0, y = 0.0, w = 0.0, h = 0.0;  // bbox, pixels
  double gender_score = 0.0;                  // P(FEMALE) in [0,1]
  double det_conf = 0.0;                      // detector confidence in [0,1]
};

struct VideoFaceTrace {
  std::vector<FaceObservation> observations;
  double frame_width = 0.0;
  double frame_height = 0.0;
};

struct FaceAggregationOptions {
  double det_conf_threshold = 0.9;
};

// Collapses a per-frame face trace into one gender label for the video.
// Observations below the detector-confidence threshold are dropped; when a
// frame holds several faces only the largest bbox is kept. The remaining
// gender scores are averaged, each weighted by its bbox area relative to the
// frame area. Throws NoFaceFound when nothing survives the threshold.
PseudoLabel aggregate_face_labels(const VideoFaceTrace& trace,
                                  const FaceAggregationOptions& opts = {});

// External face-analysis system (detector + attribute classifier) behind a
// minimal interface. `video_ref` identifies the source video; what it means
// is implementation-defined (a path, an id, a URL).
class FaceAnalyzer {
 public:
  virtual ~FaceAnalyzer() = default;
  virtual VideoFaceTrace analyze(const std::string& video_ref) = 0;
};

// Reads pre-computed traces from fixture files: <dir>/<video_ref>.json with
// {"frame_width": W, "frame_height": H, "observations": [...]}. Bboxes are
// clipped to the frame bounds on ingest. Throws FixtureMissing when the file
// does not exist.
class FixtureFaceAnalyzer : public FaceAnalyzer {
 public:
  explicit FixtureFaceAnalyzer(std::string fixture_dir);
  VideoFaceTrace analyze(const std::string& video_ref) override;

 private:
  std::string dir_;
};

// Client for a live face-analysis service speaking JSON over HTTP:
// POST <endpoint>/analyze with {"video_ref": ...} returning the trace in the
// fixture schema. Throws AnalyzerUnavailable on connection or protocol
// failure.
class HttpFaceAnalyzer : public FaceAnalyzer {
 public:
  HttpFaceAnalyzer(std::string host, int port, int timeout_s = 30);
  VideoFaceTrace analyze(const std::string& video_ref) override;

 private:
  std::string host_;
  int port_;
  int timeout_s_;
};

// Parses a trace from fixture-schema JSON text and clips bboxes to the frame.
VideoFaceTrace parse_face_trace_json(const std::string& text,
                                     const std::string& context);

}  // namespace gaitlabel
