#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "gaitlabel/common.hpp"
#include "gaitlabel/embedding.hpp"
#include "gaitlabel/face.hpp"

namespace gaitlabel {

// Sparse symmetric kNN similarity graph over unit-norm embeddings.
struct AffinityGraph {
  int n = 0;
  Eigen::SparseMatrix<double> weights;  // symmetric, zero diagonal
  int k = 0;
  double sigma = 0.0;
};

inline constexpr double kSigmaAuto = -1.0;

// Gaussian kernel on cosine distances over each node's k nearest neighbors,
// symmetrized by max. sigma = kSigmaAuto picks the median kNN distance.
// Throws TooFewSamples when n < k+1.
AffinityGraph build_knn_graph(const std::vector<Embedding>& embeddings, int k,
                              double sigma = kSigmaAuto);

// Known label for one node of the embedding set.
struct LabeledNode {
  int index = 0;
  PseudoLabel label;
};

struct PropagationResult {
  // One entry per input sequence. Labeled inputs keep their original labels;
  // the rest carry source=PROPAGATED.
  std::vector<PseudoLabel> labels;
  std::vector<double> confidence;  // in [0,1]; 1 for originally labeled nodes
};

// Majority vote over the k_vote nearest labeled embeddings (cosine distance).
// Ties are resolved by the single nearest labeled neighbor.
PropagationResult propagate_nn(const std::vector<Embedding>& embeddings,
                               const std::vector<LabeledNode>& labeled,
                               int k_vote);

enum class SpectralMode { SPREADING, CLUSTER_VOTE };

struct SpectralParams {
  double alpha = 0.99;   // spreading coefficient in (0,1)
  int n_clusters = 8;    // CLUSTER_VOTE only
  int kmeans_iters = 100;
  std::uint64_t seed = 0;
  int nn_fallback_k = 1;  // used for nodes spreading cannot decide
};

// Graph label spreading: F = (I - alpha*S)^{-1} Y with the symmetric
// normalized affinity S. Exposed separately so its output can be checked
// against closed-form solutions.
Eigen::MatrixXd spread_scores(const AffinityGraph& graph,
                              const Eigen::MatrixXd& y, double alpha);

// SPREADING: label = argmax row of F, confidence = normalized row; rows that
// receive no mass (or tie exactly) fall back to nearest-labeled-neighbor.
// CLUSTER_VOTE: normalized-cut spectral clustering; each cluster adopts the
// majority label of its labeled members; clusters without any labeled member
// fall back likewise. Originally labeled nodes always keep their labels.
PropagationResult propagate_spectral(const AffinityGraph& graph,
                                     const std::vector<Embedding>& embeddings,
                                     const std::vector<LabeledNode>& labeled,
                                     SpectralMode mode,
                                     const SpectralParams& params = {});

struct AngleAccuracy {
  int angle = 0;
  int correct = 0;
  int total = 0;
  double accuracy = 0.0;
};

struct PropagationReport {
  std::vector<AngleAccuracy> per_angle;
  double mean_excluding_source = 0.0;  // mean accuracy over non-source angles
  int source_angle = 0;
};

// Per-view-angle pseudo-label accuracy against ground truth. The source angle
// (fully labeled split) is excluded from the mean.
PropagationReport pseudo_label_report(const PropagationResult& result,
                                      const std::vector<GenderLabel>& truth,
                                      const std::vector<int>& view_angles,
                                      int source_angle = 0);

}  // namespace gaitlabel
