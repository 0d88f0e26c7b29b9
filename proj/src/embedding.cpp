#include "gaitlabel/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace gaitlabel {

namespace {

// Unsigned angle at joint b between segments b->a and b->c, in [0, pi].
double joint_angle(const Joint& a, const Joint& b, const Joint& c) {
  const double ux = a.x - b.x, uy = a.y - b.y;
  const double vx = c.x - b.x, vy = c.y - b.y;
  const double nu = std::hypot(ux, uy), nv = std::hypot(vx, vy);
  if (nu < 1e-12 || nv < 1e-12) return 0.0;
  const double cosv = std::clamp((ux * vx + uy * vy) / (nu * nv), -1.0, 1.0);
  return std::acos(cosv);
}

void push_mean_std(std::vector<double>& out, const std::vector<double>& xs) {
  double mean = 0.0;
  for (double v : xs) mean += v;
  mean /= xs.size();
  double var = 0.0;
  for (double v : xs) var += (v - mean) * (v - mean);
  var /= xs.size();
  out.push_back(mean);
  out.push_back(std::sqrt(var));
}

// Magnitudes of the three strongest nonzero-frequency components of a
// mean-removed trajectory, descending. O(n^2) DFT; sequences are short.
void push_top3_spectrum(std::vector<double>& out, const std::vector<double>& xs) {
  const int n = static_cast<int>(xs.size());
  double mean = 0.0;
  for (double v : xs) mean += v;
  mean /= n;

  std::vector<double> mags;
  for (int f = 1; f <= n / 2; ++f) {
    double re = 0.0, im = 0.0;
    for (int t = 0; t < n; ++t) {
      const double ang = -2.0 * std::numbers::pi * f * t / n;
      re += (xs[t] - mean) * std::cos(ang);
      im += (xs[t] - mean) * std::sin(ang);
    }
    mags.push_back(std::hypot(re, im) * 2.0 / n);
  }
  std::sort(mags.begin(), mags.end(), std::greater<>());
  for (int i = 0; i < 3; ++i) out.push_back(i < static_cast<int>(mags.size()) ? mags[i] : 0.0);
}

}  // namespace

Embedding handcrafted_embedding(const SkeletonSequence& seq) {
  if (!seq.normalized) {
    throw Error("handcrafted_embedding: sequence must be normalized");
  }
  const int n = seq.length();
  if (n < 1) throw SequenceUnusable("empty sequence");

  std::vector<double> features;
  features.reserve(kHandcraftedDim);

  std::vector<double> track(n);
  for (int j = 0; j < kNumJoints; ++j) {
    for (int t = 0; t < n; ++t) track[t] = seq.frames[t].joints[j].x;
    push_mean_std(features, track);
    for (int t = 0; t < n; ++t) track[t] = seq.frames[t].joints[j].y;
    push_mean_std(features, track);
  }

  const int angle_triples[4][3] = {
      {kLeftShoulder, kLeftElbow, kLeftWrist},
      {kRightShoulder, kRightElbow, kRightWrist},
      {kLeftHip, kLeftKnee, kLeftAnkle},
      {kRightHip, kRightKnee, kRightAnkle},
  };
  for (const auto& tri : angle_triples) {
    for (int t = 0; t < n; ++t) {
      const SkeletonFrame& f = seq.frames[t];
      track[t] = joint_angle(f.joints[tri[0]], f.joints[tri[1]], f.joints[tri[2]]);
    }
    push_mean_std(features, track);
  }

  for (int ankle : {kLeftAnkle, kRightAnkle}) {
    for (int t = 0; t < n; ++t) track[t] = seq.frames[t].joints[ankle].x;
    push_top3_spectrum(features, track);
  }

  Embedding e;
  e.sequence_id = seq.meta.source_video;
  e.v = Eigen::Map<Eigen::VectorXd>(features.data(), features.size());
  const double norm = e.v.norm();
  e.v /= std::max(norm, 1e-12);
  return e;
}

Embedding HandcraftedEmbedder::embed(const SkeletonSequence& seq) {
  return handcrafted_embedding(seq);
}

CachedEmbedder::CachedEmbedder(const std::string& cache_path) {
  entries_ = read_embedding_cache(cache_path);
  dim_ = entries_.empty() ? 0 : static_cast<int>(entries_.front().v.size());
}

Embedding CachedEmbedder::embed(const SkeletonSequence& seq) {
  for (const Embedding& e : entries_) {
    if (e.sequence_id == seq.meta.source_video) return e;
  }
  throw EmbedderUnavailable("no cached embedding for '" +
                            seq.meta.source_video + "'");
}

void write_embedding_cache(const std::string& path,
                           const std::vector<Embedding>& embeddings) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write embedding cache: " + path);
  const int d = embeddings.empty() ? 0 : static_cast<int>(embeddings.front().v.size());
  out << "gaitlabel-embeddings v1\n" << embeddings.size() << " " << d << "\n";
  char buf[64];
  for (const Embedding& e : embeddings) {
    if (e.v.size() != d) throw Error("embedding cache: inconsistent dimensions");
    out << e.sequence_id;
    for (int i = 0; i < d; ++i) {
      std::snprintf(buf, sizeof(buf), " %.17g", e.v(i));
      out << buf;
    }
    out << "\n";
  }
}

std::vector<Embedding> read_embedding_cache(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EmbedderUnavailable("cannot open embedding cache: " + path);
  std::string header;
  std::getline(in, header);
  if (header != "gaitlabel-embeddings v1") {
    throw ParseError(path + ": unsupported embedding cache header");
  }
  size_t n = 0;
  int d = 0;
  in >> n >> d;
  std::vector<Embedding> out(n);
  for (size_t i = 0; i < n; ++i) {
    in >> out[i].sequence_id;
    out[i].v.resize(d);
    for (int k = 0; k < d; ++k) in >> out[i].v(k);
    if (!in) throw ParseError(path + ": truncated embedding cache");
  }
  return out;
}

}  // namespace gaitlabel
