#include "gaitlabel/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace gaitlabel {

const char* to_string(Split s) {
  switch (s) {
    case Split::TRAIN: return "train";
    case Split::VAL: return "val";
    case Split::UNASSIGNED: return "-";
  }
  return "-";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::TRAIN;
  if (s == "val") return Split::VAL;
  if (s == "-") return Split::UNASSIGNED;
  throw ParseError("unknown split: " + s);
}

namespace {

constexpr const char* kManifestHeader = "# gaitlabel-manifest v1";
constexpr const char* kColumns =
    "sequence_id\tpose_path\tsubject_id\tview_angle_deg\tvariation\tlabel\t"
    "label_score\tlabel_source\tsplit";

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, '\t')) out.push_back(field);
  return out;
}

}  // namespace

std::string manifest_to_string(const DatasetManifest& manifest) {
  std::ostringstream out;
  out << kManifestHeader << "\n";
  out << "# seed=" << manifest.seed << "\n";
  out << kColumns << "\n";
  char buf[64];
  for (const ManifestEntry& e : manifest.entries) {
    out << e.sequence_id << '\t' << e.pose_path << '\t' << e.subject_id << '\t';
    if (e.view_angle_deg == kAngleUnknown) {
      out << '-';
    } else {
      out << e.view_angle_deg;
    }
    out << '\t' << to_string(e.variation) << '\t';
    if (e.label) {
      std::snprintf(buf, sizeof(buf), "%.17g", e.label->score);
      out << to_string(e.label->label) << '\t' << buf << '\t'
          << to_string(e.label->source);
    } else {
      out << "-\t-\t-";
    }
    out << '\t' << to_string(e.split) << '\n';
  }
  return out.str();
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write manifest: " + path);
  out << manifest_to_string(manifest);
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest: " + path);

  DatasetManifest manifest;
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) {
    throw ParseError(path + ": missing manifest header");
  }
  if (!std::getline(in, line) || line.rfind("# seed=", 0) != 0) {
    throw ParseError(path + ": missing seed line");
  }
  manifest.seed = std::stoull(line.substr(7));
  if (!std::getline(in, line) || line != kColumns) {
    throw ParseError(path + ": unexpected column header");
  }

  std::map<std::string, int> seen;
  int lineno = 3;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<std::string> f = split_tabs(line);
    if (f.size() != 9) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected 9 tab-separated fields, got " +
                       std::to_string(f.size()));
    }
    ManifestEntry e;
    e.sequence_id = f[0];
    e.pose_path = f[1];
    e.subject_id = f[2];
    try {
      e.view_angle_deg = f[3] == "-" ? kAngleUnknown : std::stoi(f[3]);
      e.variation = variation_from_string(f[4]);
      if (f[5] != "-") {
        PseudoLabel label;
        label.label = gender_from_string(f[5]);
        label.score = std::stod(f[6]);
        label.source = label_source_from_string(f[7]);
        e.label = label;
      }
      e.split = split_from_string(f[8]);
    } catch (const std::exception& ex) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
    if (++seen[e.sequence_id] > 1) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": duplicate sequence_id '" + e.sequence_id + "'");
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

// --- pose files --------------------------------------------------------------

SkeletonSequence load_pose_sequence(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open pose file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }

  SkeletonSequence seq;
  try {
    seq.fps = j.value("fps", 30.0);
    seq.normalized = j.value("normalized", false);

    struct Indexed {
      int frame_index;
      SkeletonFrame frame;
      double box_area;
    };
    std::map<int, Indexed> by_index;

    for (const auto& frame_json : j.at("frames")) {
      const int index = frame_json.at("frame_index").get<int>();
      for (const auto& person : frame_json.value("people", nlohmann::json::array())) {
        const auto& kp = person.at("keypoints");
        if (kp.size() != static_cast<size_t>(kNumJoints * 3)) {
          throw WrongKeypointCount(path + ": frame " + std::to_string(index) +
                                   " has " + std::to_string(kp.size() / 3) +
                                   " keypoints, expected 17");
        }
        SkeletonFrame frame;
        double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
        for (int k = 0; k < kNumJoints; ++k) {
          frame.joints[k].x = kp[k * 3].get<double>();
          frame.joints[k].y = kp[k * 3 + 1].get<double>();
          frame.joints[k].conf = kp[k * 3 + 2].get<double>();
          min_x = std::min(min_x, frame.joints[k].x);
          max_x = std::max(max_x, frame.joints[k].x);
          min_y = std::min(min_y, frame.joints[k].y);
          max_y = std::max(max_y, frame.joints[k].y);
        }
        double area = (max_x - min_x) * (max_y - min_y);
        if (person.contains("box")) {
          const auto& box = person.at("box");
          area = box[2].get<double>() * box[3].get<double>();
        }
        auto it = by_index.find(index);
        if (it == by_index.end() || area > it->second.box_area) {
          by_index[index] = {index, frame, area};
        }
      }
    }
    for (auto& [index, item] : by_index) seq.frames.push_back(item.frame);
  } catch (const WrongKeypointCount&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return seq;
}

void save_pose_sequence(const std::string& path, const SkeletonSequence& seq) {
  nlohmann::json j;
  j["fps"] = seq.fps;
  j["normalized"] = seq.normalized;
  nlohmann::json frames = nlohmann::json::array();
  for (size_t i = 0; i < seq.frames.size(); ++i) {
    nlohmann::json kp = nlohmann::json::array();
    for (const Joint& joint : seq.frames[i].joints) {
      kp.push_back(joint.x);
      kp.push_back(joint.y);
      kp.push_back(joint.conf);
    }
    frames.push_back({{"frame_index", static_cast<int>(i)},
                      {"people", nlohmann::json::array({{{"keypoints", kp}}})}});
  }
  j["frames"] = std::move(frames);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write pose file: " + path);
  out << j.dump(1, '\t') << "\n";
}

}  // namespace gaitlabel
