#include "gaitlabel/losses.hpp"

#include <algorithm>
#include <cmath>

namespace gaitlabel {

namespace {

double floored_log(double v) { return std::log(std::max(v, kLogFloor)); }

// d/dv log(max(v, floor)); zero in the floored region.
double floored_log_grad(double v) { return v > kLogFloor ? 1.0 / v : 0.0; }

void check_class(std::span<const double> p, int y) {
  if (y < 0 || y >= static_cast<int>(p.size())) {
    throw Error("class index out of range");
  }
}

}  // namespace

bool is_prob_vector(std::span<const double> p, double tol) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

double cross_entropy(std::span<const double> p, int y) {
  check_class(p, y);
  return -floored_log(p[y]);
}

std::vector<double> cross_entropy_grad(std::span<const double> p, int y) {
  check_class(p, y);
  std::vector<double> g(p.size(), 0.0);
  g[y] = -floored_log_grad(p[y]);
  return g;
}

namespace {

double focal_term(double pk, double gamma) {
  const double base = std::max(1.0 - pk, 0.0);
  return -std::pow(base, gamma) * floored_log(pk);
}

// d/dp of -(1-p)^gamma * log p, with the floored log.
double focal_term_grad(double pk, double gamma) {
  const double base = std::max(1.0 - pk, 0.0);
  double g = -std::pow(base, gamma) * floored_log_grad(pk);
  if (gamma > 0.0) g += gamma * std::pow(base, gamma - 1.0) * floored_log(pk);
  return g;
}

}  // namespace

double normalized_focal_loss(std::span<const double> p, int y, double gamma,
                             bool* degenerate) {
  check_class(p, y);
  if (gamma < 0.0) throw Error("normalized_focal_loss: gamma must be >= 0");
  if (degenerate) *degenerate = false;

  double sum = 0.0;
  for (double pk : p) sum += focal_term(pk, gamma);
  if (sum < 1e-12) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return focal_term(p[y], gamma) / sum;
}

std::vector<double> normalized_focal_loss_grad(std::span<const double> p, int y,
                                               double gamma) {
  check_class(p, y);
  const int k = static_cast<int>(p.size());
  std::vector<double> g(k, 0.0);

  double sum = 0.0;
  for (double pk : p) sum += focal_term(pk, gamma);
  if (sum < 1e-12) return g;

  const double num = focal_term(p[y], gamma);
  for (int j = 0; j < k; ++j) {
    const double dj = focal_term_grad(p[j], gamma);
    double d = -num * dj / (sum * sum);
    if (j == y) d += dj / sum;
    g[j] = d;
  }
  return g;
}

double reverse_cross_entropy(std::span<const double> p, int y, double A) {
  check_class(p, y);
  if (A >= 0.0) throw Error("reverse_cross_entropy: A must be negative");
  double loss = 0.0;
  for (int k = 0; k < static_cast<int>(p.size()); ++k) {
    if (k != y) loss -= p[k] * A;
  }
  return loss;
}

std::vector<double> reverse_cross_entropy_grad(std::span<const double> p, int y,
                                               double A) {
  check_class(p, y);
  std::vector<double> g(p.size(), -A);
  g[y] = 0.0;
  return g;
}

double nfl_rce(std::span<const double> p, int y, const NflRceParams& params) {
  if (params.alpha < 0.0 || params.beta < 0.0) {
    throw Error("nfl_rce: alpha and beta must be >= 0");
  }
  return params.alpha * normalized_focal_loss(p, y, params.gamma) +
         params.beta * reverse_cross_entropy(p, y, params.A);
}

std::vector<double> nfl_rce_grad(std::span<const double> p, int y,
                                 const NflRceParams& params) {
  std::vector<double> g = normalized_focal_loss_grad(p, y, params.gamma);
  const std::vector<double> r = reverse_cross_entropy_grad(p, y, params.A);
  for (size_t j = 0; j < g.size(); ++j) {
    g[j] = params.alpha * g[j] + params.beta * r[j];
  }
  return g;
}

NoiseRates estimate_noise_rates(const std::vector<ProbVector>& predictions,
                                const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) {
    throw Error("estimate_noise_rates: size mismatch");
  }
  double max_conf[2] = {0.0, 0.0};
  int count[2] = {0, 0};
  for (size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || c > 1) throw Error("estimate_noise_rates: binary labels only");
    ++count[c];
    max_conf[c] = std::max(max_conf[c], predictions[i][c]);
  }
  if (count[0] == 0 || count[1] == 0) {
    throw InsufficientData("estimate_noise_rates: need samples of both classes");
  }
  NoiseRates rates;
  rates.rho_female = std::clamp(1.0 - max_conf[0], 0.0, 0.49);
  rates.rho_male = std::clamp(1.0 - max_conf[1], 0.0, 0.49);
  return rates;
}

namespace {

struct IwWeight {
  double w = 0.0;
  double dw_dpy = 0.0;  // zero when clamped
};

IwWeight iw_weight(double py, int y, const NoiseRates& rates, double w_max) {
  const double rho_y = rates.rho(y);
  const double rho_other = rates.rho(1 - y);
  const double c = 1.0 - rho_y - rho_other;
  IwWeight out;
  const double denom = c * py;
  if (denom <= 0.0) return out;  // w = 0
  const double raw = (py - rho_other) / denom;
  if (raw <= 0.0) return out;
  if (raw >= w_max) {
    out.w = w_max;
    return out;
  }
  out.w = raw;
  out.dw_dpy = rho_other / (c * py * py);
  return out;
}

}  // namespace

double iw_loss(std::span<const double> p, int y, const NoiseRates& rates,
               double w_max) {
  check_class(p, y);
  if (rates.rho_female + rates.rho_male >= 1.0) {
    throw Error("iw_loss: rho_female + rho_male must be < 1");
  }
  return iw_weight(p[y], y, rates, w_max).w * cross_entropy(p, y);
}

std::vector<double> iw_loss_grad(std::span<const double> p, int y,
                                 const NoiseRates& rates, double w_max) {
  check_class(p, y);
  const IwWeight w = iw_weight(p[y], y, rates, w_max);
  std::vector<double> g(p.size(), 0.0);
  g[y] = w.dw_dpy * (-floored_log(p[y])) + w.w * (-floored_log_grad(p[y]));
  return g;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) h -= v * floored_log(v);
  return h;
}

// --- PENCIL -----------------------------------------------------------------

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - m).exp();
  return e / e.sum();
}

}  // namespace

Eigen::VectorXd PencilState::label_distribution(int idx) const {
  return softmax(logits.row(idx).transpose());
}

PencilState pencil_init(const std::vector<int>& noisy_labels, int num_classes,
                        double k_init) {
  PencilState state;
  state.logits = Eigen::MatrixXd::Zero(static_cast<int>(noisy_labels.size()),
                                       num_classes);
  for (size_t i = 0; i < noisy_labels.size(); ++i) {
    const int y = noisy_labels[i];
    if (y < 0 || y >= num_classes) throw Error("pencil_init: label out of range");
    state.logits(static_cast<int>(i), y) = k_init;
  }
  state.phase = PencilPhase::WARMUP;
  return state;
}

PencilStepResult pencil_step(std::span<const double> pred,
                             const PencilState& state, int idx, int noisy_label,
                             const PencilParams& params) {
  const int k = static_cast<int>(pred.size());
  check_class(pred, noisy_label);
  if (idx < 0 || idx >= state.size()) throw Error("pencil_step: bad sample index");

  PencilStepResult res;
  res.grad_pred.assign(k, 0.0);
  res.grad_label_logits = Eigen::VectorXd::Zero(k);

  if (state.phase == PencilPhase::WARMUP) {
    res.loss = cross_entropy(pred, noisy_label);
    res.grad_pred = cross_entropy_grad(pred, noisy_label);
    return res;
  }

  const Eigen::VectorXd l = state.label_distribution(idx);

  if (state.phase == PencilPhase::FINETUNE) {
    // Labels frozen at their corrected distribution.
    double loss = 0.0;
    for (int j = 0; j < k; ++j) {
      loss -= l(j) * floored_log(pred[j]);
      res.grad_pred[j] = -l(j) * floored_log_grad(pred[j]);
    }
    res.loss = loss;
    return res;
  }

  // CORRECTION
  double kl = 0.0;
  for (int j = 0; j < k; ++j) {
    kl += l(j) * (floored_log(l(j)) - floored_log(pred[j]));
  }
  const double ce_label = -floored_log(l(noisy_label));
  const double ent = entropy(pred);
  res.loss = kl / k + params.alpha_c * ce_label + params.beta_c * ent;

  for (int j = 0; j < k; ++j) {
    res.grad_pred[j] = -l(j) * floored_log_grad(pred[j]) / k +
                       params.beta_c * (-floored_log(pred[j]) - 1.0);
  }

  // Gradient wrt the label distribution, then through its softmax.
  Eigen::VectorXd gl(k);
  for (int j = 0; j < k; ++j) {
    gl(j) = (floored_log(l(j)) + 1.0 - floored_log(pred[j])) / k;
  }
  gl(noisy_label) -= params.alpha_c / std::max(l(noisy_label), kLogFloor);
  const double dot = gl.dot(l);
  for (int j = 0; j < k; ++j) {
    res.grad_label_logits(j) = l(j) * (gl(j) - dot);
  }
  return res;
}

void pencil_update_labels(PencilState& state, int idx,
                          const Eigen::VectorXd& grad, double lr) {
  if (state.phase != PencilPhase::CORRECTION) {
    throw PhaseViolation("label logits may only be updated in CORRECTION");
  }
  if (idx < 0 || idx >= state.size()) {
    throw Error("pencil_update_labels: bad sample index");
  }
  state.logits.row(idx) -= lr * grad.transpose();
}

}  // namespace gaitlabel
