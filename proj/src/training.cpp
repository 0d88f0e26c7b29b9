#include "gaitlabel/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace gaitlabel {

const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::CE: return "ce";
    case LossKind::NFL_RCE: return "nflrce";
    case LossKind::IW: return "iw";
    case LossKind::PENCIL: return "pencil";
  }
  return "ce";
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "ce") return LossKind::CE;
  if (s == "nflrce") return LossKind::NFL_RCE;
  if (s == "iw") return LossKind::IW;
  if (s == "pencil") return LossKind::PENCIL;
  throw ParseError("unknown loss kind: " + s);
}

namespace {

template <typename T>
void shuffle_vec(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
  }
}

}  // namespace

BalancedSampler::BalancedSampler(const std::vector<int>& labels,
                                 BalanceMode mode, std::uint64_t seed)
    : mode_(mode), seed_(seed) {
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] > 1) {
      throw Error("BalancedSampler: binary labels expected");
    }
    by_class_[labels[i]].push_back(static_cast<int>(i));
  }
  if (mode_ != BalanceMode::NONE &&
      (by_class_[0].empty() || by_class_[1].empty())) {
    throw SingleClassDataset("balancing requires samples of both classes");
  }
}

std::vector<int> BalancedSampler::epoch_indices(int epoch) const {
  Rng rng(hash_combine(seed_, static_cast<std::uint64_t>(epoch)));
  std::vector<int> out;

  if (mode_ == BalanceMode::NONE) {
    out.reserve(by_class_[0].size() + by_class_[1].size());
    out.insert(out.end(), by_class_[0].begin(), by_class_[0].end());
    out.insert(out.end(), by_class_[1].begin(), by_class_[1].end());
    shuffle_vec(out, rng);
    return out;
  }

  const int minority = by_class_[0].size() <= by_class_[1].size() ? 0 : 1;
  const std::vector<int>& mino = by_class_[minority];
  const std::vector<int>& majo = by_class_[1 - minority];

  if (mode_ == BalanceMode::OVERSAMPLE_MINORITY) {
    out.insert(out.end(), majo.begin(), majo.end());
    const size_t target = majo.size();
    size_t written = 0;
    while (written + mino.size() <= target) {
      std::vector<int> copy = mino;
      shuffle_vec(copy, rng);
      out.insert(out.end(), copy.begin(), copy.end());
      written += mino.size();
    }
    if (written < target) {
      std::vector<int> copy = mino;
      shuffle_vec(copy, rng);
      out.insert(out.end(), copy.begin(), copy.begin() + (target - written));
    }
  } else {
    std::vector<int> copy = majo;
    shuffle_vec(copy, rng);
    out.insert(out.end(), copy.begin(), copy.begin() + mino.size());
    out.insert(out.end(), mino.begin(), mino.end());
  }
  shuffle_vec(out, rng);
  return out;
}

namespace {

// Packs model inputs into the (C, N*H*W) activation layout.
Mat<float> pack_inputs(const std::vector<const TssiImage*>& imgs, int side) {
  const long plane = static_cast<long>(side) * side;
  Mat<float> input(3, static_cast<long>(imgs.size()) * plane);
  for (size_t n = 0; n < imgs.size(); ++n) {
    const std::vector<float> planes = tssi_to_model_input(*imgs[n], side);
    for (int c = 0; c < 3; ++c) {
      for (long i = 0; i < plane; ++i) {
        input(c, static_cast<long>(n) * plane + i) = planes[c * plane + i];
      }
    }
  }
  return input;
}

std::vector<double> softmax_col(const Mat<float>& logits, int col) {
  const int k = static_cast<int>(logits.rows());
  double m = logits(0, col);
  for (int i = 1; i < k; ++i) m = std::max(m, static_cast<double>(logits(i, col)));
  std::vector<double> p(k);
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    p[i] = std::exp(static_cast<double>(logits(i, col)) - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<ProbVector> predict_with(ResNet<float>& net, const TrainingSet& ds) {
  std::vector<ProbVector> preds;
  preds.reserve(ds.size());
  const int chunk = 128;
  for (size_t start = 0; start < ds.size(); start += chunk) {
    const size_t end = std::min(ds.size(), start + chunk);
    std::vector<const TssiImage*> imgs;
    imgs.reserve(end - start);
    for (size_t i = start; i < end; ++i) imgs.push_back(&ds[i].image);
    Mat<float> input = pack_inputs(imgs, net.cfg.input_side);
    Mat<float> logits = net.forward(input, static_cast<int>(imgs.size()), false);
    for (int c = 0; c < logits.cols(); ++c) preds.push_back(softmax_col(logits, c));
  }
  return preds;
}

struct Confusion {
  // counts[true][pred]
  long counts[2][2] = {{0, 0}, {0, 0}};

  void add(int truth, int pred) { ++counts[truth][pred]; }
  long total() const {
    return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
  }
  double accuracy() const {
    const long t = total();
    return t == 0 ? 0.0 : static_cast<double>(counts[0][0] + counts[1][1]) / t;
  }
  double class_f1(int c) const {
    const double tp = static_cast<double>(counts[c][c]);
    const double fp = static_cast<double>(counts[1 - c][c]);
    const double fn = static_cast<double>(counts[c][1 - c]);
    const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    return prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
  }
  double macro_f1() const { return (class_f1(0) + class_f1(1)) / 2.0; }
};

Metrics metrics_from_predictions(const std::vector<ProbVector>& preds,
                                 const TrainingSet& ds, GroupBy group_by) {
  Confusion overall;
  std::map<std::string, Confusion> by_group;
  for (size_t i = 0; i < ds.size(); ++i) {
    const int pred = preds[i][1] > preds[i][0] ? 1 : 0;
    overall.add(ds[i].label, pred);
    if (group_by == GroupBy::ANGLE) {
      by_group[std::to_string(ds[i].view_angle_deg)].add(ds[i].label, pred);
    } else if (group_by == GroupBy::VARIATION) {
      by_group[to_string(ds[i].variation)].add(ds[i].label, pred);
    }
  }

  Metrics m;
  m.macro_f1 = overall.macro_f1();
  m.accuracy = overall.accuracy();
  double sum = 0.0;
  for (const auto& [name, conf] : by_group) {
    m.groups.push_back({name, conf.macro_f1(), conf.accuracy(),
                        static_cast<int>(conf.total())});
    sum += conf.macro_f1();
  }
  m.group_mean_f1 = by_group.empty() ? m.macro_f1 : sum / by_group.size();
  return m;
}

}  // namespace

ModelHandle::ModelHandle(const NetConfig& cfg)
    : net_(std::make_shared<ResNet<float>>(cfg)) {}

ProbVector ModelHandle::predict(const TssiImage& img) const {
  std::vector<const TssiImage*> one{&img};
  Mat<float> input = pack_inputs(one, net_->cfg.input_side);
  Mat<float> logits = net_->forward(input, 1, false);
  return softmax_col(logits, 0);
}

std::vector<ProbVector> ModelHandle::predict_batch(
    const std::vector<const TssiImage*>& imgs) const {
  std::vector<ProbVector> out;
  out.reserve(imgs.size());
  const int chunk = 128;
  for (size_t start = 0; start < imgs.size(); start += chunk) {
    const size_t end = std::min(imgs.size(), start + chunk);
    std::vector<const TssiImage*> slice(imgs.begin() + start, imgs.begin() + end);
    Mat<float> input = pack_inputs(slice, net_->cfg.input_side);
    Mat<float> logits = net_->forward(input, static_cast<int>(slice.size()), false);
    for (int c = 0; c < logits.cols(); ++c) out.push_back(softmax_col(logits, c));
  }
  return out;
}

namespace {

constexpr char kModelMagic[9] = "GLMODEL1";

}  // namespace

void ModelHandle::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file: " + path);
  out.write(kModelMagic, 8);
  const std::int32_t header[3] = {net_->cfg.input_side, net_->cfg.base_width,
                                  net_->cfg.num_classes};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  save_net(out, *net_);
}

ModelHandle ModelHandle::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != kModelMagic) {
    throw ParseError(path + ": not a model file");
  }
  std::int32_t header[3];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  NetConfig cfg;
  cfg.input_side = header[0];
  cfg.base_width = header[1];
  cfg.num_classes = header[2];
  ModelHandle handle(cfg);
  load_net(in, *handle.net_);
  return handle;
}

Metrics evaluate_f1(const ModelHandle& model, const TrainingSet& dataset,
                    GroupBy group_by) {
  ModelHandle& mutable_model = const_cast<ModelHandle&>(model);
  const std::vector<ProbVector> preds =
      predict_with(mutable_model.net(), dataset);
  return metrics_from_predictions(preds, dataset, group_by);
}

TrainResult train(const TrainingSet& train_set, const TrainingSet& val_set,
                  const TrainConfig& cfg) {
  if (train_set.empty()) throw Error("train: empty dataset");
  if (cfg.batch_size < 1) throw Error("train: batch_size must be >= 1");
  if (cfg.learning_rate <= 0) throw Error("train: learning_rate must be > 0");

  NetConfig net_cfg = cfg.net;
  net_cfg.init_seed = hash_combine(cfg.seed, hash_str("init"));
  ResNet<float> net(net_cfg);
  std::vector<ParamRef<float>> params = net.params();
  AdamConfig adam{cfg.learning_rate};

  std::vector<int> labels(train_set.size());
  for (size_t i = 0; i < train_set.size(); ++i) labels[i] = train_set[i].label;
  const BalancedSampler sampler(labels, cfg.balance,
                                hash_combine(cfg.seed, hash_str("sampler")));

  PencilState pencil;
  if (cfg.loss == LossKind::PENCIL) {
    pencil = pencil_init(labels, net_cfg.num_classes, cfg.pencil.k_init);
  }
  NoiseRates iw_rates;
  bool iw_rates_ready = false;

  TrainResult result{ModelHandle(net_cfg), {}, 0.0};
  std::stringstream best_snapshot;
  bool have_snapshot = false;
  int patience_left = cfg.early_stop_patience;
  int step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.loss == LossKind::PENCIL) {
      pencil.phase = cfg.pencil.phase_for_epoch(epoch);
    }
    if (cfg.loss == LossKind::IW && !iw_rates_ready &&
        epoch >= cfg.iw_warmup_epochs) {
      const TrainingSet& ref = val_set.empty() ? train_set : val_set;
      const std::vector<ProbVector> preds = predict_with(net, ref);
      std::vector<int> ref_labels(ref.size());
      for (size_t i = 0; i < ref.size(); ++i) ref_labels[i] = ref[i].label;
      try {
        iw_rates = estimate_noise_rates(preds, ref_labels);
        iw_rates_ready = true;
      } catch (const InsufficientData&) {
        iw_rates_ready = false;  // keep training with CE until possible
      }
    }

    const std::vector<int> order = sampler.epoch_indices(epoch);
    double loss_sum = 0.0;
    long loss_count = 0;

    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      const int batch = static_cast<int>(end - start);

      std::vector<const TssiImage*> imgs(batch);
      std::vector<TssiImage> scratch(batch);
      for (int b = 0; b < batch; ++b) {
        const TrainSample& s = train_set[order[start + b]];
        if (cfg.augment && s.sequence.has_value()) {
          Rng rng(hash_combine(hash_combine(cfg.seed, hash_str(s.sequence_id)),
                               static_cast<std::uint64_t>(epoch)));
          scratch[b] = encode_tssi(
              augment_sequence(*s.sequence, cfg.augment_options, rng),
              cfg.tssi_frames);
          imgs[b] = &scratch[b];
        } else {
          imgs[b] = &s.image;
        }
      }

      Mat<float> input = pack_inputs(imgs, net_cfg.input_side);
      Mat<float> logits = net.forward(input, batch, true);
      Mat<float> grad_logits(logits.rows(), logits.cols());

      double batch_loss = 0.0;
      for (int b = 0; b < batch; ++b) {
        const int idx = order[start + b];
        const int y = train_set[idx].label;
        const std::vector<double> p = softmax_col(logits, b);

        double loss = 0.0;
        std::vector<double> gp;
        switch (cfg.loss) {
          case LossKind::CE:
            loss = cross_entropy(p, y);
            gp = cross_entropy_grad(p, y);
            break;
          case LossKind::NFL_RCE:
            loss = nfl_rce(p, y, cfg.nfl_rce);
            gp = nfl_rce_grad(p, y, cfg.nfl_rce);
            break;
          case LossKind::IW:
            if (iw_rates_ready) {
              loss = iw_loss(p, y, iw_rates, cfg.iw_w_max);
              gp = iw_loss_grad(p, y, iw_rates, cfg.iw_w_max);
            } else {
              loss = cross_entropy(p, y);
              gp = cross_entropy_grad(p, y);
            }
            break;
          case LossKind::PENCIL: {
            PencilStepResult r = pencil_step(p, pencil, idx, y, cfg.pencil);
            loss = r.loss;
            gp = r.grad_pred;
            if (pencil.phase == PencilPhase::CORRECTION) {
              pencil_update_labels(pencil, idx, r.grad_label_logits,
                                   cfg.pencil.label_lr);
            }
            break;
          }
        }
        batch_loss += loss;

        // d loss / d logits through the softmax, averaged over the batch.
        double dot = 0.0;
        for (size_t k = 0; k < p.size(); ++k) dot += gp[k] * p[k];
        for (size_t k = 0; k < p.size(); ++k) {
          grad_logits(static_cast<int>(k), b) =
              static_cast<float>(p[k] * (gp[k] - dot) / batch);
        }
      }

      if (!std::isfinite(batch_loss)) {
        throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch starting at " + std::to_string(start) +
                            ": " + std::to_string(batch_loss));
      }
      loss_sum += batch_loss;
      loss_count += batch;

      net.zero_grad();
      net.backward(grad_logits);
      adam_step(params, adam, ++step);
    }

    EpochLog log_entry;
    log_entry.epoch = epoch;
    log_entry.train_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;

    if (!val_set.empty()) {
      const std::vector<ProbVector> preds = predict_with(net, val_set);
      const Metrics m = metrics_from_predictions(preds, val_set, GroupBy::NONE);
      log_entry.val_f1 = m.macro_f1;
      if (m.macro_f1 > result.best_val_f1 + 1e-12 || !have_snapshot) {
        result.best_val_f1 = m.macro_f1;
        best_snapshot.str({});
        best_snapshot.clear();
        save_net(best_snapshot, net);
        have_snapshot = true;
        patience_left = cfg.early_stop_patience;
      } else if (--patience_left <= 0) {
        result.log.push_back(log_entry);
        break;
      }
    }
    result.log.push_back(log_entry);
  }

  if (have_snapshot) {
    best_snapshot.seekg(0);
    load_net(best_snapshot, net);
  }
  result.model.net() = std::move(net);
  return result;
}

TrainResult train_semisupervised(const TrainingSet& front_labeled,
                                 const TrainingSet& propagated,
                                 const TrainingSet& val_set,
                                 const TrainConfig& cfg,
                                 double min_confidence) {
  TrainingSet merged = front_labeled;
  for (const TrainSample& s : propagated) {
    if (s.source == LabelSource::PROPAGATED && s.label_score < min_confidence) {
      continue;
    }
    merged.push_back(s);
  }
  return train(merged, val_set, cfg);
}

SubjectSplit split_by_subject(const TrainingSet& data, int holdout_subjects,
                              std::uint64_t seed) {
  std::set<std::string> unique;
  for (const TrainSample& s : data) unique.insert(s.subject_id);
  if (static_cast<int>(unique.size()) < holdout_subjects + 1) {
    throw TooFewSubjects("need at least " + std::to_string(holdout_subjects + 1) +
                         " subjects, got " + std::to_string(unique.size()));
  }

  std::vector<std::string> subjects(unique.begin(), unique.end());
  Rng rng(seed);
  shuffle_vec(subjects, rng);
  std::set<std::string> val_subjects(subjects.begin(),
                                     subjects.begin() + holdout_subjects);

  SubjectSplit split;
  for (size_t i = 0; i < data.size(); ++i) {
    if (val_subjects.count(data[i].subject_id)) {
      split.val_indices.push_back(static_cast<int>(i));
    } else {
      split.train_indices.push_back(static_cast<int>(i));
    }
  }
  return split;
}

SubjectSplit split_by_subject_fraction(const TrainingSet& data,
                                       double val_fraction, std::uint64_t seed) {
  std::set<std::string> unique;
  for (const TrainSample& s : data) unique.insert(s.subject_id);
  const int holdout = std::max(
      1, static_cast<int>(std::lround(unique.size() * val_fraction)));
  return split_by_subject(data, holdout, seed);
}

TrainingSet subset(const TrainingSet& data, const std::vector<int>& indices) {
  TrainingSet out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(data[i]);
  return out;
}

CrossvalMetrics crossval_fvg(const TrainingSet& dataset, int holdout_subjects,
                             int repeats, const TrainConfig& cfg) {
  if (repeats < 1) throw Error("crossval_fvg: repeats must be >= 1");

  // Column order: variations as they appear in the enum, then "All".
  std::set<int> present;
  for (const TrainSample& s : dataset) present.insert(static_cast<int>(s.variation));
  std::vector<std::string> columns;
  for (int v : present) columns.push_back(to_string(static_cast<Variation>(v)));
  columns.push_back("All");

  std::vector<std::vector<double>> rows;
  for (int r = 0; r < repeats; ++r) {
    const SubjectSplit split = split_by_subject(
        dataset, holdout_subjects,
        hash_combine(cfg.seed, hash_combine(hash_str("cvsplit"), r)));
    TrainConfig run_cfg = cfg;
    run_cfg.seed = hash_combine(cfg.seed, static_cast<std::uint64_t>(r));
    const TrainResult res =
        train(subset(dataset, split.train_indices),
              subset(dataset, split.val_indices), run_cfg);
    const Metrics m = evaluate_f1(res.model, subset(dataset, split.val_indices),
                                  GroupBy::VARIATION);

    std::vector<double> row;
    for (size_t c = 0; c + 1 < columns.size(); ++c) {
      double f1 = 0.0;
      for (const GroupMetric& g : m.groups) {
        if (g.group == columns[c]) f1 = g.f1;
      }
      row.push_back(f1);
    }
    row.push_back(m.macro_f1);
    rows.push_back(row);
  }

  CrossvalMetrics out;
  out.columns = columns;
  out.repeats = repeats;
  for (size_t c = 0; c < columns.size(); ++c) {
    double mean = 0.0;
    for (const auto& row : rows) mean += row[c];
    mean /= repeats;
    double var = 0.0;
    for (const auto& row : rows) var += (row[c] - mean) * (row[c] - mean);
    const double stddev = repeats > 1 ? std::sqrt(var / (repeats - 1)) : 0.0;
    out.mean_f1.push_back(mean);
    out.std_f1.push_back(stddev);
  }
  return out;
}

}  // namespace gaitlabel
