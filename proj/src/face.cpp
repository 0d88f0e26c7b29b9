#include "gaitlabel/face.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#define CPPHTTPLIB_NO_EXCEPTIONS_SUPPORT_DISABLED
#include <httplib.h>

namespace gaitlabel {

const char* to_string(GenderLabel g) {
  return g == GenderLabel::FEMALE ? "female" : "male";
}

GenderLabel gender_from_string(const std::string& s) {
  if (s == "female") return GenderLabel::FEMALE;
  if (s == "male") return GenderLabel::MALE;
  throw ParseError("unknown gender label: " + s);
}

const char* to_string(LabelSource s) {
  switch (s) {
    case LabelSource::GROUND_TRUTH: return "true";
    case LabelSource::FACE: return "face";
    case LabelSource::PROPAGATED: return "propagated";
  }
  return "true";
}

LabelSource label_source_from_string(const std::string& s) {
  if (s == "true") return LabelSource::GROUND_TRUTH;
  if (s == "face") return LabelSource::FACE;
  if (s == "propagated") return LabelSource::PROPAGATED;
  throw ParseError("unknown label source: " + s);
}

PseudoLabel aggregate_face_labels(const VideoFaceTrace& trace,
                                  const FaceAggregationOptions& opts) {
  if (trace.frame_width <= 0 || trace.frame_height <= 0) {
    throw Error("aggregate_face_labels: frame dimensions must be positive");
  }

  // Largest surviving bbox per frame; one walker per sequence is assumed.
  std::map<int, const FaceObservation*> per_frame;
  for (const FaceObservation& obs : trace.observations) {
    if (obs.det_conf < opts.det_conf_threshold) continue;
    if (obs.w <= 0 || obs.h <= 0) continue;
    auto [it, inserted] = per_frame.try_emplace(obs.frame_index, &obs);
    if (!inserted && obs.w * obs.h > it->second->w * it->second->h) {
      it->second = &obs;
    }
  }
  if (per_frame.empty()) {
    throw NoFaceFound("no observation passed det_conf threshold " +
                      std::to_string(opts.det_conf_threshold));
  }

  const double frame_area = trace.frame_width * trace.frame_height;
  double weight_sum = 0.0;
  double score_sum = 0.0;
  for (const auto& [frame, obs] : per_frame) {
    const double w = (obs->w * obs->h) / frame_area;
    weight_sum += w;
    score_sum += w * obs->gender_score;
  }

  PseudoLabel out;
  out.score = score_sum / weight_sum;
  out.label = out.score >= 0.5 ? GenderLabel::FEMALE : GenderLabel::MALE;
  out.source = LabelSource::FACE;
  return out;
}

VideoFaceTrace parse_face_trace_json(const std::string& text,
                                     const std::string& context) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(context + ": " + e.what());
  }

  VideoFaceTrace trace;
  try {
    trace.frame_width = j.at("frame_width").get<double>();
    trace.frame_height = j.at("frame_height").get<double>();
    for (const auto& o : j.value("observations", nlohmann::json::array())) {
      FaceObservation obs;
      obs.frame_index = o.at("frame_index").get<int>();
      obs.x = o.at("x").get<double>();
      obs.y = o.at("y").get<double>();
      obs.w = o.at("w").get<double>();
      obs.h = o.at("h").get<double>();
      obs.gender_score = o.at("gender_score").get<double>();
      obs.det_conf = o.at("det_conf").get<double>();

      // Clip to frame bounds; the area weighting sees the visible box only.
      const double x0 = std::clamp(obs.x, 0.0, trace.frame_width);
      const double y0 = std::clamp(obs.y, 0.0, trace.frame_height);
      const double x1 = std::clamp(obs.x + obs.w, 0.0, trace.frame_width);
      const double y1 = std::clamp(obs.y + obs.h, 0.0, trace.frame_height);
      obs.x = x0;
      obs.y = y0;
      obs.w = std::max(0.0, x1 - x0);
      obs.h = std::max(0.0, y1 - y0);
      trace.observations.push_back(obs);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(context + ": " + e.what());
  }
  return trace;
}

FixtureFaceAnalyzer::FixtureFaceAnalyzer(std::string fixture_dir)
    : dir_(std::move(fixture_dir)) {}

VideoFaceTrace FixtureFaceAnalyzer::analyze(const std::string& video_ref) {
  const std::filesystem::path path =
      std::filesystem::path(dir_) / (video_ref + ".json");
  std::ifstream in(path);
  if (!in) throw FixtureMissing("no face trace fixture at " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_face_trace_json(buf.str(), path.string());
}

HttpFaceAnalyzer::HttpFaceAnalyzer(std::string host, int port, int timeout_s)
    : host_(std::move(host)), port_(port), timeout_s_(timeout_s) {}

VideoFaceTrace HttpFaceAnalyzer::analyze(const std::string& video_ref) {
  httplib::Client client(host_, port_);
  client.set_connection_timeout(timeout_s_);
  client.set_read_timeout(timeout_s_);

  nlohmann::json req{{"video_ref", video_ref}};
  auto res = client.Post("/analyze", req.dump(), "application/json");
  if (!res) {
    throw AnalyzerUnavailable("face analyzer at " + host_ + ":" +
                              std::to_string(port_) + " unreachable");
  }
  if (res->status != 200) {
    throw AnalyzerUnavailable("face analyzer returned status " +
                              std::to_string(res->status));
  }
  return parse_face_trace_json(res->body, host_ + "/analyze");
}

}  // namespace gaitlabel
