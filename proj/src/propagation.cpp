#include "gaitlabel/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace gaitlabel {

namespace {

double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return 1.0 - a.dot(b);
}

void check_unit_norm(const std::vector<Embedding>& embeddings) {
  for (const Embedding& e : embeddings) {
    if (std::abs(e.v.norm() - 1.0) > 1e-6) {
      throw Error("embedding '" + e.sequence_id + "' is not unit-norm");
    }
  }
}

}  // namespace

AffinityGraph build_knn_graph(const std::vector<Embedding>& embeddings, int k,
                              double sigma) {
  const int n = static_cast<int>(embeddings.size());
  if (k < 1) throw Error("build_knn_graph: k must be >= 1");
  if (n < k + 1) {
    throw TooFewSamples("build_knn_graph: need at least k+1 = " +
                        std::to_string(k + 1) + " samples, got " +
                        std::to_string(n));
  }
  check_unit_norm(embeddings);

  // k nearest neighbors per node, by cosine distance.
  std::vector<std::vector<std::pair<double, int>>> knn(n);
  std::vector<double> knn_dists;
  knn_dists.reserve(static_cast<size_t>(n) * k);
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> dists;
    dists.reserve(n - 1);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      dists.emplace_back(cosine_distance(embeddings[i].v, embeddings[j].v), j);
    }
    std::partial_sort(dists.begin(), dists.begin() + k, dists.end());
    dists.resize(k);
    for (const auto& [d, j] : dists) knn_dists.push_back(d);
    knn[i] = std::move(dists);
  }

  if (sigma == kSigmaAuto) {
    std::nth_element(knn_dists.begin(), knn_dists.begin() + knn_dists.size() / 2,
                     knn_dists.end());
    sigma = knn_dists[knn_dists.size() / 2];
  }
  sigma = std::max(sigma, 1e-12);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<size_t>(n) * k * 2);
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (const auto& [d, j] : knn[i]) {
      const double w = std::exp(-(d * d) / (2.0 * sigma * sigma));
      // Symmetrize by max.
      dense(i, j) = std::max(dense(i, j), w);
      dense(j, i) = std::max(dense(j, i), w);
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (dense(i, j) > 0.0) triplets.emplace_back(i, j, dense(i, j));
    }
  }

  AffinityGraph graph;
  graph.n = n;
  graph.k = k;
  graph.sigma = sigma;
  graph.weights.resize(n, n);
  graph.weights.setFromTriplets(triplets.begin(), triplets.end());
  return graph;
}

namespace {

struct Vote {
  int winner = 0;
  double fraction = 0.0;
  bool tie = false;
};

Vote majority(const std::vector<int>& votes) {
  int counts[2] = {0, 0};
  for (int v : votes) ++counts[v];
  Vote out;
  out.tie = counts[0] == counts[1];
  out.winner = counts[1] > counts[0] ? 1 : 0;
  out.fraction = static_cast<double>(std::max(counts[0], counts[1])) /
                 std::max<size_t>(votes.size(), 1);
  return out;
}

int label_to_class(GenderLabel g) { return g == GenderLabel::FEMALE ? 0 : 1; }
GenderLabel class_to_label(int c) {
  return c == 0 ? GenderLabel::FEMALE : GenderLabel::MALE;
}

// Nearest labeled neighbors of node i, ascending by cosine distance.
std::vector<std::pair<double, int>> labeled_by_distance(
    const std::vector<Embedding>& embeddings,
    const std::vector<LabeledNode>& labeled, int i) {
  std::vector<std::pair<double, int>> dists;
  dists.reserve(labeled.size());
  for (size_t l = 0; l < labeled.size(); ++l) {
    dists.emplace_back(
        cosine_distance(embeddings[i].v, embeddings[labeled[l].index].v),
        static_cast<int>(l));
  }
  std::sort(dists.begin(), dists.end());
  return dists;
}

}  // namespace

PropagationResult propagate_nn(const std::vector<Embedding>& embeddings,
                               const std::vector<LabeledNode>& labeled,
                               int k_vote) {
  const int n = static_cast<int>(embeddings.size());
  if (labeled.empty()) throw NoLabeledSamples("propagate_nn: no labeled samples");
  if (k_vote < 1) throw Error("propagate_nn: k_vote must be >= 1");
  check_unit_norm(embeddings);

  std::vector<char> is_labeled(n, 0);
  PropagationResult res;
  res.labels.resize(n);
  res.confidence.assign(n, 0.0);
  for (const LabeledNode& ln : labeled) {
    if (ln.index < 0 || ln.index >= n) throw Error("propagate_nn: bad index");
    is_labeled[ln.index] = 1;
    res.labels[ln.index] = ln.label;
    res.confidence[ln.index] = 1.0;
  }

  const int kv = std::min<int>(k_vote, static_cast<int>(labeled.size()));
  for (int i = 0; i < n; ++i) {
    if (is_labeled[i]) continue;
    auto dists = labeled_by_distance(embeddings, labeled, i);
    std::vector<int> votes;
    votes.reserve(kv);
    for (int v = 0; v < kv; ++v) {
      votes.push_back(label_to_class(labeled[dists[v].second].label.label));
    }
    Vote vote = majority(votes);
    int cls = vote.winner;
    if (vote.tie) cls = label_to_class(labeled[dists[0].second].label.label);

    res.labels[i].label = class_to_label(cls);
    res.labels[i].score = vote.tie ? 0.5 : vote.fraction;
    res.labels[i].source = LabelSource::PROPAGATED;
    res.confidence[i] = res.labels[i].score;
  }
  return res;
}

Eigen::MatrixXd spread_scores(const AffinityGraph& graph,
                              const Eigen::MatrixXd& y, double alpha) {
  if (alpha <= 0.0 || alpha >= 1.0) {
    throw Error("spread_scores: alpha must lie in (0,1)");
  }
  const int n = graph.n;
  Eigen::MatrixXd w = Eigen::MatrixXd(graph.weights);
  Eigen::VectorXd deg = w.rowwise().sum();
  for (int i = 0; i < n; ++i) {
    if (deg(i) <= 0.0) throw SingularSystem("isolated node in affinity graph");
  }
  Eigen::VectorXd dinv_sqrt = deg.array().rsqrt();
  Eigen::MatrixXd s = dinv_sqrt.asDiagonal() * w * dinv_sqrt.asDiagonal();

  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - alpha * s;
  Eigen::LDLT<Eigen::MatrixXd> solver(system);
  if (solver.info() != Eigen::Success) {
    throw SingularSystem("label spreading system could not be factorized; "
                         "retry with smaller alpha");
  }
  Eigen::MatrixXd f = solver.solve(y);
  if (!f.allFinite()) {
    throw SingularSystem("label spreading produced non-finite scores; "
                         "retry with smaller alpha");
  }
  return f;
}

namespace {

// Deterministic k-means on rows: k-means++ seeding from the given rng,
// Lloyd iterations, empty clusters reseeded to the farthest point.
std::vector<int> kmeans_rows(const Eigen::MatrixXd& x, int k, int iters,
                             std::uint64_t seed) {
  const int n = static_cast<int>(x.rows());
  Rng rng(seed);
  Eigen::MatrixXd centers(k, x.cols());

  centers.row(0) = x.row(static_cast<int>(uniform_index(rng, n)));
  Eigen::VectorXd best_d2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = best_d2.sum();
    int pick = 0;
    if (total > 0.0) {
      double r = uniform01(rng) * total;
      for (int i = 0; i < n; ++i) {
        r -= best_d2(i);
        if (r <= 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(uniform_index(rng, n));
    }
    centers.row(c) = x.row(pick);
    best_d2 = best_d2.cwiseMin(
        (x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  std::vector<int> assign(n, 0);
  for (int it = 0; it < iters; ++it) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = (x.row(i) - centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (x.row(i) - centers.row(c)).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      sums.row(assign[i]) += x.row(i);
      ++counts[assign[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers.row(c) = sums.row(c) / counts[c];
      } else {
        // Reseed to the point farthest from its center.
        int far = 0;
        double fd = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d = (x.row(i) - centers.row(assign[i])).squaredNorm();
          if (d > fd) {
            fd = d;
            far = i;
          }
        }
        centers.row(c) = x.row(far);
        changed = true;
      }
    }
    if (!changed) break;
  }
  return assign;
}

}  // namespace

PropagationResult propagate_spectral(const AffinityGraph& graph,
                                     const std::vector<Embedding>& embeddings,
                                     const std::vector<LabeledNode>& labeled,
                                     SpectralMode mode,
                                     const SpectralParams& params) {
  const int n = graph.n;
  if (static_cast<int>(embeddings.size()) != n) {
    throw Error("propagate_spectral: embeddings/graph size mismatch");
  }
  if (labeled.empty()) {
    throw NoLabeledSamples("propagate_spectral: no labeled samples");
  }

  std::vector<char> is_labeled(n, 0);
  PropagationResult res;
  res.labels.resize(n);
  res.confidence.assign(n, 0.0);
  int class_seen[2] = {0, 0};
  for (const LabeledNode& ln : labeled) {
    if (ln.index < 0 || ln.index >= n) throw Error("propagate_spectral: bad index");
    is_labeled[ln.index] = 1;
    res.labels[ln.index] = ln.label;
    res.confidence[ln.index] = 1.0;
    ++class_seen[label_to_class(ln.label.label)];
  }

  auto nn_fallback = [&](int i) {
    auto dists = labeled_by_distance(embeddings, labeled, i);
    const GenderLabel g = labeled[dists[0].second].label.label;
    res.labels[i].label = g;
    res.labels[i].score = 0.5;
    res.labels[i].source = LabelSource::PROPAGATED;
    res.confidence[i] = 0.5;
  };

  if (mode == SpectralMode::SPREADING) {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, 2);
    for (const LabeledNode& ln : labeled) {
      y(ln.index, label_to_class(ln.label.label)) = 1.0;
    }
    const Eigen::MatrixXd f = spread_scores(graph, y, params.alpha);

    for (int i = 0; i < n; ++i) {
      if (is_labeled[i]) continue;  // labeled rows keep their true labels
      const double mass = f(i, 0) + f(i, 1);
      if (mass < 1e-12 || f(i, 0) == f(i, 1)) {
        nn_fallback(i);
        continue;
      }
      const int cls = f(i, 1) > f(i, 0) ? 1 : 0;
      res.labels[i].label = class_to_label(cls);
      res.labels[i].score = f(i, cls) / mass;
      res.labels[i].source = LabelSource::PROPAGATED;
      res.confidence[i] = res.labels[i].score;
    }
    return res;
  }

  // CLUSTER_VOTE
  if (class_seen[0] == 0 || class_seen[1] == 0) {
    throw NoLabeledSamples(
        "propagate_spectral: CLUSTER_VOTE needs a labeled sample per class");
  }
  const int c = std::min(params.n_clusters, n);

  Eigen::MatrixXd w = Eigen::MatrixXd(graph.weights);
  Eigen::VectorXd deg = w.rowwise().sum();
  for (int i = 0; i < n; ++i) {
    if (deg(i) <= 0.0) throw SingularSystem("isolated node in affinity graph");
  }
  Eigen::VectorXd dinv_sqrt = deg.array().rsqrt();
  Eigen::MatrixXd s = dinv_sqrt.asDiagonal() * w * dinv_sqrt.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  if (eig.info() != Eigen::Success) {
    throw SingularSystem("spectral decomposition failed");
  }
  // Largest eigenvalues of S == smallest of the normalized Laplacian.
  Eigen::MatrixXd basis = eig.eigenvectors().rightCols(c);
  for (int i = 0; i < n; ++i) {
    const double norm = basis.row(i).norm();
    if (norm > 1e-12) basis.row(i) /= norm;
  }

  const std::vector<int> assign =
      kmeans_rows(basis, c, params.kmeans_iters, params.seed);

  std::vector<std::vector<int>> cluster_votes(c);
  for (const LabeledNode& ln : labeled) {
    cluster_votes[assign[ln.index]].push_back(label_to_class(ln.label.label));
  }

  for (int i = 0; i < n; ++i) {
    if (is_labeled[i]) continue;
    const std::vector<int>& votes = cluster_votes[assign[i]];
    if (votes.empty()) {
      nn_fallback(i);
      continue;
    }
    Vote vote = majority(votes);
    int cls = vote.winner;
    if (vote.tie) {
      nn_fallback(i);
      continue;
    }
    res.labels[i].label = class_to_label(cls);
    res.labels[i].score = vote.fraction;
    res.labels[i].source = LabelSource::PROPAGATED;
    res.confidence[i] = vote.fraction;
  }
  return res;
}

PropagationReport pseudo_label_report(const PropagationResult& result,
                                      const std::vector<GenderLabel>& truth,
                                      const std::vector<int>& view_angles,
                                      int source_angle) {
  const size_t n = result.labels.size();
  if (truth.size() != n || view_angles.size() != n) {
    throw Error("pseudo_label_report: size mismatch");
  }

  std::map<int, AngleAccuracy> per_angle;
  for (size_t i = 0; i < n; ++i) {
    AngleAccuracy& acc = per_angle[view_angles[i]];
    acc.angle = view_angles[i];
    ++acc.total;
    if (result.labels[i].label == truth[i]) ++acc.correct;
  }

  PropagationReport report;
  report.source_angle = source_angle;
  double sum = 0.0;
  int groups = 0;
  for (auto& [angle, acc] : per_angle) {
    acc.accuracy = static_cast<double>(acc.correct) / acc.total;
    report.per_angle.push_back(acc);
    if (angle != source_angle) {
      sum += acc.accuracy;
      ++groups;
    }
  }
  report.mean_excluding_source = groups > 0 ? sum / groups : 0.0;
  return report;
}

}  // namespace gaitlabel
