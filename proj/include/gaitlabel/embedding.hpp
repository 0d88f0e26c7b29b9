#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gaitlabel/common.hpp"
#include "gaitlabel/skeleton.hpp"

namespace gaitlabel {

// Unit-norm gait descriptor of one walking sequence.
struct Embedding {
  Eigen::VectorXd v;
  std::string sequence_id;
};

// Similarity model between walking sequences. The intended production
// implementation is an external pretrained metric network; this interface
// keeps it pluggable.
class GaitEmbedder {
 public:
  virtual ~GaitEmbedder() = default;
  virtual Embedding embed(const SkeletonSequence& seq) = 0;
  virtual int dim() const = 0;
};

// Fixed descriptor dimension of the handcrafted embedder:
// 17 joints x (x,y) x (mean,std) = 68, elbow/knee angles x (mean,std) = 8,
// top-3 spectral magnitudes of each ankle's x trajectory = 6.
inline constexpr int kHandcraftedDim = 82;

// Statistics-based fallback for desk-scale runs without a pretrained metric
// network. Deterministic; expects a normalized sequence; keys the output on
// meta.source_video.
class HandcraftedEmbedder : public GaitEmbedder {
 public:
  Embedding embed(const SkeletonSequence& seq) override;
  int dim() const override { return kHandcraftedDim; }
};

Embedding handcrafted_embedding(const SkeletonSequence& seq);

// Serves embeddings computed offline (e.g. by an external metric network)
// from a cache file, keyed on meta.source_video. Throws EmbedderUnavailable
// for unknown sequences.
class CachedEmbedder : public GaitEmbedder {
 public:
  explicit CachedEmbedder(const std::string& cache_path);
  Embedding embed(const SkeletonSequence& seq) override;
  int dim() const override { return dim_; }

 private:
  std::vector<Embedding> entries_;
  int dim_ = 0;
};

// Plain-text cache: "gaitlabel-embeddings v1", "n d", then one line per
// sequence: id followed by d coefficients. Written with round-trip precision
// so re-running a stage reproduces identical bytes.
void write_embedding_cache(const std::string& path,
                           const std::vector<Embedding>& embeddings);
std::vector<Embedding> read_embedding_cache(const std::string& path);

}  // namespace gaitlabel
