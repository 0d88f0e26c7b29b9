#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gaitlabel/common.hpp"
#include "gaitlabel/face.hpp"
#include "gaitlabel/losses.hpp"
#include "gaitlabel/net.hpp"
#include "gaitlabel/skeleton.hpp"
#include "gaitlabel/tssi.hpp"

namespace gaitlabel {

enum class LossKind { CE, NFL_RCE, IW, PENCIL };
const char* to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

enum class BalanceMode { OVERSAMPLE_MINORITY, UNDERSAMPLE_MAJORITY, NONE };

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 128;
  int epochs = 50;
  LossKind loss = LossKind::CE;
  BalanceMode balance = BalanceMode::OVERSAMPLE_MINORITY;
  std::uint64_t seed = 0;
  int early_stop_patience = 10;

  bool augment = false;
  AugmentOptions augment_options;
  int tssi_frames = kDefaultTssiFrames;

  NetConfig net;
  NflRceParams nfl_rce;
  PencilParams pencil;
  double iw_w_max = kIwWeightMax;
  int iw_warmup_epochs = 1;  // CE epochs before noise rates are estimated
};

// One sequence ready for training: encoded image plus enough context for
// augmentation, grouping and subject-disjoint splits.
struct TrainSample {
  std::string sequence_id;
  std::string subject_id;
  int view_angle_deg = kAngleUnknown;
  Variation variation = Variation::OTHER;
  TssiImage image;
  std::optional<SkeletonSequence> sequence;  // normalized; enables augmentation
  int label = 0;                             // 0 = female, 1 = male
  LabelSource source = LabelSource::GROUND_TRUTH;
  double label_score = 1.0;
};

using TrainingSet = std::vector<TrainSample>;

// Deterministic per-epoch index streams with class balancing.
// OVERSAMPLE repeats minority indices (reshuffled each epoch) up to the
// majority count; UNDERSAMPLE subsamples the majority down to the minority
// count. Throws SingleClassDataset when balancing is requested on one class.
class BalancedSampler {
 public:
  BalancedSampler(const std::vector<int>& labels, BalanceMode mode,
                  std::uint64_t seed);
  std::vector<int> epoch_indices(int epoch) const;

 private:
  std::vector<int> by_class_[2];
  BalanceMode mode_;
  std::uint64_t seed_;
};

enum class GroupBy { NONE, ANGLE, VARIATION };

struct GroupMetric {
  std::string group;
  double f1 = 0.0;
  double accuracy = 0.0;
  int support = 0;
};

struct Metrics {
  double macro_f1 = 0.0;  // mean of per-class F1; absent predictions score 0
  double accuracy = 0.0;
  std::vector<GroupMetric> groups;
  double group_mean_f1 = 0.0;  // mean over group F1 values
};

// Trained classifier behind a stable prediction surface. Prediction runs the
// network in evaluation mode and is deterministic.
class ModelHandle {
 public:
  explicit ModelHandle(const NetConfig& cfg);
  ProbVector predict(const TssiImage& img) const;
  std::vector<ProbVector> predict_batch(const std::vector<const TssiImage*>& imgs) const;

  void save(const std::string& path) const;
  static ModelHandle load(const std::string& path);

  const NetConfig& net_config() const { return net_->cfg; }
  ResNet<float>& net() { return *net_; }

 private:
  std::shared_ptr<ResNet<float>> net_;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_f1 = 0.0;
};

struct TrainResult {
  ModelHandle model;
  std::vector<EpochLog> log;
  double best_val_f1 = 0.0;
};

// Trains the classifier under the configured loss. Deterministic given
// (dataset, config): all randomness is derived from config.seed. Keeps the
// parameters of the best validation epoch when a validation set is given.
// Throws NonFiniteLoss with diagnostics when the loss diverges.
TrainResult train(const TrainingSet& train_set, const TrainingSet& val_set,
                  const TrainConfig& cfg);

Metrics evaluate_f1(const ModelHandle& model, const TrainingSet& dataset,
                    GroupBy group_by);

// Union of face/true front-view labels and confident propagated labels.
// Propagated samples below min_confidence are dropped.
TrainResult train_semisupervised(const TrainingSet& front_labeled,
                                 const TrainingSet& propagated,
                                 const TrainingSet& val_set,
                                 const TrainConfig& cfg,
                                 double min_confidence = 0.6);

struct SubjectSplit {
  std::vector<int> train_indices;
  std::vector<int> val_indices;
};

// Subject-disjoint split: holdout_subjects whole subjects go to validation.
SubjectSplit split_by_subject(const TrainingSet& data, int holdout_subjects,
                              std::uint64_t seed);
// Same, with the validation size given as a fraction of subjects.
SubjectSplit split_by_subject_fraction(const TrainingSet& data,
                                       double val_fraction, std::uint64_t seed);

TrainingSet subset(const TrainingSet& data, const std::vector<int>& indices);

struct CrossvalMetrics {
  std::vector<std::string> columns;  // per-variation plus "All"
  std::vector<double> mean_f1;
  std::vector<double> std_f1;
  int repeats = 0;
};

// Repeated subject-disjoint cross-validation; per-variation F1 mean and
// standard deviation over the repeats. Throws TooFewSubjects when the holdout
// cannot be satisfied.
CrossvalMetrics crossval_fvg(const TrainingSet& dataset, int holdout_subjects,
                             int repeats, const TrainConfig& cfg);

}  // namespace gaitlabel
