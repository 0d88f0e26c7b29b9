#include "gaitlabel/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include <json.hpp>

namespace gaitlabel {

namespace {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

// Per-subject kinematic draw; shared by all view angles of that subject.
struct WalkerParams {
  double scale, freq, phase0, arm_amp, stride_w, leg_amp, twist_amp, bob;
};

WalkerParams draw_walker(const SynthStyle& style, Rng& rng) {
  WalkerParams p;
  p.scale = 1.0 + 0.05 * gaussian(rng);
  p.freq = 0.9 * (1.0 + 0.1 * gaussian(rng));
  p.phase0 = uniform01(rng) * 2.0 * std::numbers::pi;
  p.arm_amp = std::max(0.02, style.arm_swing_amplitude * (1.0 + 0.08 * gaussian(rng)));
  p.stride_w = std::max(0.02, style.stride_width * (1.0 + 0.08 * gaussian(rng)));
  p.leg_amp = 0.5 * (1.0 + 0.05 * gaussian(rng));
  p.twist_amp = 0.15 * (1.0 + 0.1 * gaussian(rng));
  p.bob = 0.025 * (1.0 + 0.2 * gaussian(rng));
  return p;
}

// 3D pose of the walker at one time instant. x lateral (left positive),
// y up, z walking direction.
std::array<Vec3, kNumJoints> walker_pose(const WalkerParams& p, double time) {
  const double s = p.scale;
  const double hip_h = 0.92 * s, hip_half = 0.10 * s;
  const double sh_h = 1.45 * s, sh_half = 0.19 * s;
  const double thigh = 0.42 * s, shank = 0.42 * s;
  const double upper_arm = 0.28 * s, forearm = 0.26 * s;
  const double nose_h = 1.62 * s, head_fwd = 0.08 * s;

  const double phi = 2.0 * std::numbers::pi * p.freq * time + p.phase0;
  const double twist = p.twist_amp * std::sin(phi);
  const double hip_twist = -0.5 * twist;
  const double bob_y = p.bob * std::sin(2.0 * phi);

  std::array<Vec3, kNumJoints> j{};

  auto shoulder = [&](int side) {  // +1 left, -1 right
    return Vec3{side * sh_half * std::cos(twist), sh_h + 0.6 * bob_y,
                -side * sh_half * std::sin(twist)};
  };
  auto hip = [&](int side) {
    return Vec3{side * hip_half * std::cos(hip_twist), hip_h + bob_y,
                -side * hip_half * std::sin(hip_twist)};
  };

  j[kLeftShoulder] = shoulder(+1);
  j[kRightShoulder] = shoulder(-1);
  j[kLeftHip] = hip(+1);
  j[kRightHip] = hip(-1);

  auto leg = [&](int side, double phase) {
    const Vec3 h = hip(side);
    const double alpha = p.leg_amp * std::sin(phase);
    const double bend = 0.5 * std::max(0.0, std::sin(phase - 0.3));
    const double gamma = alpha - bend;
    const double foot_x = side * p.stride_w / 2.0;
    Vec3 knee{0.5 * (h.x + foot_x), h.y - thigh * std::cos(alpha),
              h.z + thigh * std::sin(alpha)};
    Vec3 ankle{foot_x, knee.y - shank * std::cos(gamma),
               knee.z + shank * std::sin(gamma)};
    return std::pair{knee, ankle};
  };
  auto [lknee, lankle] = leg(+1, phi);
  auto [rknee, rankle] = leg(-1, phi + std::numbers::pi);
  j[kLeftKnee] = lknee;
  j[kLeftAnkle] = lankle;
  j[kRightKnee] = rknee;
  j[kRightAnkle] = rankle;

  auto arm = [&](int side, double phase) {
    const Vec3 sh = shoulder(side);
    const double beta = p.arm_amp * std::sin(phase);
    Vec3 elbow{sh.x * 1.02, sh.y - upper_arm * std::cos(beta),
               sh.z + upper_arm * std::sin(beta)};
    const double wrist_ang = beta + 0.35;
    Vec3 wrist{sh.x * 1.04, elbow.y - forearm * std::cos(wrist_ang),
               elbow.z + forearm * std::sin(wrist_ang)};
    return std::pair{elbow, wrist};
  };
  // Arms counter-swing their same-side leg.
  auto [lelbow, lwrist] = arm(+1, phi + std::numbers::pi);
  auto [relbow, rwrist] = arm(-1, phi);
  j[kLeftElbow] = lelbow;
  j[kLeftWrist] = lwrist;
  j[kRightElbow] = relbow;
  j[kRightWrist] = rwrist;

  const double head_yaw = 0.3 * twist;
  auto head_point = [&](double lx, double ly, double lz) {
    return Vec3{lx * std::cos(head_yaw) + lz * std::sin(head_yaw),
                nose_h + ly + 0.5 * bob_y,
                -lx * std::sin(head_yaw) + lz * std::cos(head_yaw)};
  };
  j[kNose] = head_point(0.0, 0.0, head_fwd);
  j[kLeftEye] = head_point(0.033 * s, 0.04 * s, head_fwd + 0.02 * s);
  j[kRightEye] = head_point(-0.033 * s, 0.04 * s, head_fwd + 0.02 * s);
  j[kLeftEar] = head_point(0.072 * s, 0.02 * s, head_fwd - 0.03 * s);
  j[kRightEar] = head_point(-0.072 * s, 0.02 * s, head_fwd - 0.03 * s);
  return j;
}

constexpr double kImageCx = 320.0;
constexpr double kImageCy = 460.0;
constexpr double kImageScale = 120.0;

}  // namespace

SynthDataset generate_synthetic_dataset(const SynthConfig& cfg) {
  if (cfg.subjects_per_style < 1 || cfg.styles.empty() || cfg.frames < 2) {
    throw Error("generate_synthetic_dataset: bad configuration");
  }
  for (int a : cfg.angles) {
    if (a < 0 || a > 180 || a % 18 != 0) {
      throw Error("generate_synthetic_dataset: angles must lie in {0,18,...,180}");
    }
  }

  SynthDataset out;
  out.manifest.seed = cfg.seed;

  for (size_t style_idx = 0; style_idx < cfg.styles.size(); ++style_idx) {
    const SynthStyle& style = cfg.styles[style_idx];
    for (int subj = 0; subj < cfg.subjects_per_style; ++subj) {
      const std::uint64_t subj_key =
          hash_combine(hash_combine(cfg.seed, style_idx), subj);
      Rng subj_rng(subj_key);
      const WalkerParams params = draw_walker(style, subj_rng);

      char subject_id[32];
      std::snprintf(subject_id, sizeof(subject_id), "st%zu_s%03d", style_idx, subj);

      for (int angle : cfg.angles) {
        char seq_id[48];
        std::snprintf(seq_id, sizeof(seq_id), "%s_a%03d", subject_id, angle);

        Rng noise_rng(hash_combine(subj_key, hash_combine(hash_str("noise"), angle)));
        const double theta = angle * std::numbers::pi / 180.0;
        const double c = std::cos(theta), s = std::sin(theta);

        SkeletonSequence seq;
        seq.fps = cfg.fps;
        seq.meta.subject_id = subject_id;
        seq.meta.view_angle_deg = angle;
        seq.meta.variation = Variation::NM;
        seq.meta.source_video = seq_id;
        seq.frames.resize(cfg.frames);
        for (int t = 0; t < cfg.frames; ++t) {
          const auto pose = walker_pose(params, t / cfg.fps);
          for (int k = 0; k < kNumJoints; ++k) {
            const double u = pose[k].x * c + pose[k].z * s +
                             cfg.noise_std * gaussian(noise_rng);
            const double v = pose[k].y + cfg.noise_std * gaussian(noise_rng);
            seq.frames[t].joints[k].x = kImageCx + kImageScale * u;
            seq.frames[t].joints[k].y = kImageCy - kImageScale * v;
            seq.frames[t].joints[k].conf =
                std::clamp(0.97 - std::abs(0.03 * gaussian(noise_rng)), 0.5, 1.0);
          }
        }

        ManifestEntry entry;
        entry.sequence_id = seq_id;
        entry.pose_path = std::string("poses/") + seq_id + ".json";
        entry.subject_id = subject_id;
        entry.view_angle_deg = angle;
        entry.variation = Variation::NM;
        entry.label = PseudoLabel{style.label, 1.0, LabelSource::GROUND_TRUTH};
        out.manifest.entries.push_back(entry);
        out.sequences.push_back(std::move(seq));
      }
    }
  }
  return out;
}

void write_synthetic_dataset(const SynthDataset& dataset, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "poses");
  for (size_t i = 0; i < dataset.sequences.size(); ++i) {
    const fs::path path = fs::path(dir) / dataset.manifest.entries[i].pose_path;
    save_pose_sequence(path.string(), dataset.sequences[i]);
  }
  write_manifest((fs::path(dir) / "manifest.tsv").string(), dataset.manifest);

  std::set<std::pair<std::string, std::string>> subjects;
  for (const ManifestEntry& e : dataset.manifest.entries) {
    if (e.label) subjects.emplace(e.subject_id, to_string(e.label->label));
  }
  std::ofstream labels((fs::path(dir) / "labels.tsv").string(), std::ios::binary);
  labels << "subject_id\tlabel\n";
  for (const auto& [subject, label] : subjects) {
    labels << subject << '\t' << label << '\n';
  }
}

void write_face_fixtures(const DatasetManifest& manifest, const std::string& dir,
                         const FaceFixtureOptions& opts) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const ManifestEntry& e : manifest.entries) {
    if (e.view_angle_deg != 0 || !e.label) continue;
    Rng rng(hash_combine(opts.seed, hash_str(e.sequence_id)));

    bool female = e.label->label == GenderLabel::FEMALE;
    if (uniform01(rng) < opts.flip_prob) female = !female;
    const double base = female ? 0.5 + opts.score_margin : 0.5 - opts.score_margin;

    nlohmann::json obs = nlohmann::json::array();
    for (int i = 0; i < opts.observations; ++i) {
      const double score =
          std::clamp(base + opts.score_noise * gaussian(rng), 0.02, 0.98);
      const double w = 30.0 + 20.0 * uniform01(rng);
      const double h = w * (1.1 + 0.2 * uniform01(rng));
      obs.push_back({{"frame_index", i * 3},
                     {"x", 280.0 + 60.0 * uniform01(rng)},
                     {"y", 80.0 + 40.0 * uniform01(rng)},
                     {"w", w},
                     {"h", h},
                     {"gender_score", score},
                     {"det_conf", opts.det_conf}});
    }
    nlohmann::json trace{{"frame_width", 640.0},
                         {"frame_height", 480.0},
                         {"observations", obs}};
    std::ofstream out((fs::path(dir) / (e.sequence_id + ".json")).string(),
                      std::ios::binary);
    out << trace.dump(1, '\t') << "\n";
  }
}

}  // namespace gaitlabel
