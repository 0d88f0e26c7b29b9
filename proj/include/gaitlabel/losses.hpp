#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gaitlabel/common.hpp"

namespace gaitlabel {

// Arguments of every logarithm are floored here; removes the simplex-boundary
// singularities without disturbing values away from them.
inline constexpr double kLogFloor = 1e-12;

using ProbVector = std::vector<double>;

// True when entries are nonnegative and sum to 1 within tol.
bool is_prob_vector(std::span<const double> p, double tol = 1e-6);

// -log p[y]
double cross_entropy(std::span<const double> p, int y);
std::vector<double> cross_entropy_grad(std::span<const double> p, int y);

// Focal term FL(p,k) = -(1-p[k])^gamma * log p[k], normalized over classes:
// FL(p,y) / sum_k FL(p,k). When the denominator vanishes the loss is 0 and
// *degenerate (if given) is set.
double normalized_focal_loss(std::span<const double> p, int y, double gamma,
                             bool* degenerate = nullptr);
std::vector<double> normalized_focal_loss_grad(std::span<const double> p, int y,
                                               double gamma);

// -sum_k p[k] log q[k] with q one-hot at y and log 0 replaced by A (A < 0).
double reverse_cross_entropy(std::span<const double> p, int y, double A);
std::vector<double> reverse_cross_entropy_grad(std::span<const double> p, int y,
                                               double A);

struct NflRceParams {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 2.0;
  double A = -4.0;
};

// alpha * NFL + beta * RCE; robust to symmetric label noise.
double nfl_rce(std::span<const double> p, int y, const NflRceParams& params = {});
std::vector<double> nfl_rce_grad(std::span<const double> p, int y,
                                 const NflRceParams& params = {});

// Class-conditional flip probabilities. rho_female = P(FEMALE -> MALE).
struct NoiseRates {
  double rho_female = 0.0;
  double rho_male = 0.0;

  double rho(int cls) const { return cls == 0 ? rho_female : rho_male; }
};

// Anchor-point estimate: rho_c = 1 - max over samples labeled c of p[c],
// clamped to [0, 0.49]. Throws InsufficientData when a class has no samples.
NoiseRates estimate_noise_rates(const std::vector<ProbVector>& predictions,
                                const std::vector<int>& labels);

inline constexpr double kIwWeightMax = 10.0;

// Importance-reweighted cross entropy. The weight
//   w = (p[y] - rho_other) / ((1 - rho_y - rho_other) * p[y])
// is clamped to [0, w_max]; samples that look mislabeled get weight 0.
double iw_loss(std::span<const double> p, int y, const NoiseRates& rates,
               double w_max = kIwWeightMax);
// Gradient of the implemented scalar (the weight's dependence on p included).
std::vector<double> iw_loss_grad(std::span<const double> p, int y,
                                 const NoiseRates& rates,
                                 double w_max = kIwWeightMax);

// --- PENCIL ----------------------------------------------------------------

enum class PencilPhase { WARMUP, CORRECTION, FINETUNE };

struct PencilParams {
  double k_init = 10.0;   // initial label-logit magnitude
  double alpha_c = 0.1;   // compatibility weight (CE vs noisy labels)
  double beta_c = 0.4;    // entropy weight
  int warmup_epochs = 5;
  int correction_epochs = 15;
  int finetune_epochs = 10;
  double label_lr = 10.0;  // step size for the per-sample label logits

  PencilPhase phase_for_epoch(int epoch) const {
    if (epoch < warmup_epochs) return PencilPhase::WARMUP;
    if (epoch < warmup_epochs + correction_epochs) return PencilPhase::CORRECTION;
    return PencilPhase::FINETUNE;
  }
};

// One learnable label distribution per training sample, kept as unconstrained
// logits. Single writer: the training loop.
struct PencilState {
  Eigen::MatrixXd logits;  // n_samples x K
  PencilPhase phase = PencilPhase::WARMUP;

  int size() const { return static_cast<int>(logits.rows()); }
  Eigen::VectorXd label_distribution(int idx) const;  // softmax of row idx
};

PencilState pencil_init(const std::vector<int>& noisy_labels, int num_classes,
                        double k_init = 10.0);

struct PencilStepResult {
  double loss = 0.0;
  std::vector<double> grad_pred;          // d loss / d pred
  Eigen::VectorXd grad_label_logits;      // d loss / d label logits (row idx)
};

// Loss and gradients for one sample under the current phase:
//   WARMUP     plain CE against the noisy label, label logits untouched
//   CORRECTION KL(softmax(state) || pred)/K + alpha_c*CE(softmax(state), y)
//              + beta_c*entropy(pred); both sides receive gradients
//   FINETUNE   CE of pred against the frozen corrected distribution
PencilStepResult pencil_step(std::span<const double> pred, const PencilState& state,
                             int idx, int noisy_label, const PencilParams& params);

// Applies a gradient step to one sample's label logits. Throws PhaseViolation
// outside the CORRECTION phase.
void pencil_update_labels(PencilState& state, int idx,
                          const Eigen::VectorXd& grad, double lr);

// -sum_k p[k] log p[k]
double entropy(std::span<const double> p);

}  // namespace gaitlabel
