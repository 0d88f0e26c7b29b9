#pragma once

#include <cmath>
#include <istream>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "gaitlabel/common.hpp"

// Minimal CNN stack sized for TSSI inputs: im2col convolutions backed by
// Eigen GEMM, batch norm, residual basic blocks, global average pooling.
// Activations live in (C, N*H*W) matrices, column index ((n*H + h)*W + w).
// Templated on the scalar so gradient checks can run in double while
// training runs in float.

namespace gaitlabel {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

struct TensorShape {
  int n = 0, c = 0, h = 0, w = 0;
  long spatial() const { return static_cast<long>(h) * w; }
  long cols() const { return static_cast<long>(n) * h * w; }
};

// One trainable tensor with its gradient and Adam moments.
template <typename S>
struct ParamRef {
  Mat<S>* value;
  Mat<S>* grad;
  Mat<S>* m;
  Mat<S>* v;
};

template <typename S>
struct Conv2d {
  int in_ch = 0, out_ch = 0, ksize = 3, stride = 1, pad = 1;
  Mat<S> weight, grad_w, m_w, v_w;  // (out_ch, in_ch*k*k)
  Mat<S> in_cache;
  TensorShape in_shape;

  void init(int in_c, int out_c, int k, int s, Rng& rng) {
    in_ch = in_c;
    out_ch = out_c;
    ksize = k;
    stride = s;
    pad = k / 2;
    const int fan_in = in_c * k * k;
    const double stddev = std::sqrt(2.0 / fan_in);
    weight.resize(out_c, fan_in);
    for (long i = 0; i < weight.size(); ++i) {
      weight.data()[i] = static_cast<S>(gaussian(rng) * stddev);
    }
    grad_w = Mat<S>::Zero(out_c, fan_in);
    m_w = grad_w;
    v_w = grad_w;
  }

  TensorShape out_shape(const TensorShape& in) const {
    TensorShape out;
    out.n = in.n;
    out.c = out_ch;
    out.h = (in.h + 2 * pad - ksize) / stride + 1;
    out.w = (in.w + 2 * pad - ksize) / stride + 1;
    return out;
  }

  void im2col(const Mat<S>& x, const TensorShape& in, Mat<S>& cols) const {
    const TensorShape out = out_shape(in);
    cols.setZero(in.c * ksize * ksize, out.cols());
    for (int n = 0; n < in.n; ++n) {
      for (int oh = 0; oh < out.h; ++oh) {
        for (int ow = 0; ow < out.w; ++ow) {
          const long col = (static_cast<long>(n) * out.h + oh) * out.w + ow;
          for (int ci = 0; ci < in.c; ++ci) {
            for (int ki = 0; ki < ksize; ++ki) {
              const int h = oh * stride - pad + ki;
              if (h < 0 || h >= in.h) continue;
              const long row_base = (static_cast<long>(ci) * ksize + ki) * ksize;
              const long x_base = (static_cast<long>(n) * in.h + h) * in.w;
              for (int kj = 0; kj < ksize; ++kj) {
                const int w = ow * stride - pad + kj;
                if (w < 0 || w >= in.w) continue;
                cols(row_base + kj, col) = x(ci, x_base + w);
              }
            }
          }
        }
      }
    }
  }

  Mat<S> forward(const Mat<S>& x, const TensorShape& in, bool train) {
    if (train) {
      in_cache = x;
      in_shape = in;
    }
    Mat<S> cols;
    im2col(x, in, cols);
    return weight * cols;
  }

  Mat<S> backward(const Mat<S>& grad_out) {
    Mat<S> cols;
    im2col(in_cache, in_shape, cols);
    grad_w.noalias() += grad_out * cols.transpose();

    const Mat<S> grad_cols = weight.transpose() * grad_out;
    const TensorShape out = out_shape(in_shape);
    Mat<S> grad_in = Mat<S>::Zero(in_shape.c, in_shape.cols());
    for (int n = 0; n < in_shape.n; ++n) {
      for (int oh = 0; oh < out.h; ++oh) {
        for (int ow = 0; ow < out.w; ++ow) {
          const long col = (static_cast<long>(n) * out.h + oh) * out.w + ow;
          for (int ci = 0; ci < in_shape.c; ++ci) {
            for (int ki = 0; ki < ksize; ++ki) {
              const int h = oh * stride - pad + ki;
              if (h < 0 || h >= in_shape.h) continue;
              const long row_base = (static_cast<long>(ci) * ksize + ki) * ksize;
              const long x_base = (static_cast<long>(n) * in_shape.h + h) * in_shape.w;
              for (int kj = 0; kj < ksize; ++kj) {
                const int w = ow * stride - pad + kj;
                if (w < 0 || w >= in_shape.w) continue;
                grad_in(ci, x_base + w) += grad_cols(row_base + kj, col);
              }
            }
          }
        }
      }
    }
    in_cache.resize(0, 0);
    return grad_in;
  }

  void collect(std::vector<ParamRef<S>>& out) {
    out.push_back({&weight, &grad_w, &m_w, &v_w});
  }
};

template <typename S>
struct BatchNorm2d {
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  Mat<S> gamma, beta, grad_gamma, grad_beta;
  Mat<S> m_gamma, v_gamma, m_beta, v_beta;
  Mat<S> running_mean, running_var;
  Mat<S> xhat_cache;
  Mat<S> invstd_cache;  // per channel

  void init(int channels) {
    gamma = Mat<S>::Ones(channels, 1);
    beta = Mat<S>::Zero(channels, 1);
    grad_gamma = Mat<S>::Zero(channels, 1);
    grad_beta = grad_gamma;
    m_gamma = grad_gamma;
    v_gamma = grad_gamma;
    m_beta = grad_gamma;
    v_beta = grad_gamma;
    running_mean = Mat<S>::Zero(channels, 1);
    running_var = Mat<S>::Ones(channels, 1);
  }

  Mat<S> forward(const Mat<S>& x, bool train) {
    const long m = x.cols();
    Mat<S> y(x.rows(), x.cols());
    if (train) {
      Mat<S> mean = x.rowwise().mean();
      Mat<S> var = ((x.colwise() - mean.col(0)).array().square())
                       .rowwise()
                       .mean()
                       .matrix();
      invstd_cache =
          (var.array() + static_cast<S>(kEps)).rsqrt().matrix();
      xhat_cache = (x.colwise() - mean.col(0)).array().colwise() *
                   invstd_cache.col(0).array();
      y = (xhat_cache.array().colwise() * gamma.col(0).array()).matrix();
      y.colwise() += beta.col(0);
      running_mean = (1 - kMomentum) * running_mean + kMomentum * mean;
      running_var = (1 - kMomentum) * running_var + kMomentum * var;
      (void)m;
    } else {
      Mat<S> invstd =
          (running_var.array() + static_cast<S>(kEps)).rsqrt().matrix();
      y = ((x.colwise() - running_mean.col(0)).array().colwise() *
           (invstd.col(0).array() * gamma.col(0).array()))
              .matrix();
      y.colwise() += beta.col(0);
    }
    return y;
  }

  Mat<S> backward(const Mat<S>& grad_out) {
    const long m = grad_out.cols();
    grad_gamma.col(0).noalias() +=
        (grad_out.array() * xhat_cache.array()).rowwise().sum().matrix();
    grad_beta.col(0).noalias() += grad_out.rowwise().sum();

    // dxhat = dy * gamma; dx = invstd/m * (m*dxhat - sum(dxhat)
    //          - xhat * sum(dxhat .* xhat)), per channel.
    Mat<S> dxhat = grad_out.array().colwise() * gamma.col(0).array();
    Mat<S> sum_dxhat = dxhat.rowwise().sum();
    Mat<S> sum_dxhat_xhat =
        (dxhat.array() * xhat_cache.array()).rowwise().sum().matrix();
    Mat<S> grad_in =
        ((dxhat * static_cast<S>(m)).colwise() - sum_dxhat.col(0)).array() -
        (xhat_cache.array().colwise() * sum_dxhat_xhat.col(0).array());
    grad_in = grad_in.array().colwise() *
              (invstd_cache.col(0).array() / static_cast<S>(m));
    xhat_cache.resize(0, 0);
    return grad_in;
  }

  void collect(std::vector<ParamRef<S>>& out) {
    out.push_back({&gamma, &grad_gamma, &m_gamma, &v_gamma});
    out.push_back({&beta, &grad_beta, &m_beta, &v_beta});
  }

  void collect_buffers(std::vector<Mat<S>*>& out) {
    out.push_back(&running_mean);
    out.push_back(&running_var);
  }
};

template <typename S>
struct Relu {
  Mat<S> mask;

  Mat<S> forward(const Mat<S>& x, bool train) {
    Mat<S> y = x.cwiseMax(static_cast<S>(0));
    if (train) mask = (x.array() > 0).template cast<S>().matrix();
    return y;
  }

  Mat<S> backward(const Mat<S>& grad_out) {
    Mat<S> g = grad_out.cwiseProduct(mask);
    mask.resize(0, 0);
    return g;
  }
};

template <typename S>
struct BasicBlock {
  Conv2d<S> conv1, conv2;
  BatchNorm2d<S> bn1, bn2;
  Relu<S> relu1, relu2;
  bool has_downsample = false;
  Conv2d<S> conv_ds;
  BatchNorm2d<S> bn_ds;
  Mat<S> skip_cache;

  void init(int in_c, int out_c, int stride, Rng& rng) {
    conv1.init(in_c, out_c, 3, stride, rng);
    bn1.init(out_c);
    conv2.init(out_c, out_c, 3, 1, rng);
    bn2.init(out_c);
    has_downsample = stride != 1 || in_c != out_c;
    if (has_downsample) {
      conv_ds.init(in_c, out_c, 1, stride, rng);
      bn_ds.init(out_c);
    }
  }

  TensorShape out_shape(const TensorShape& in) const {
    return conv1.out_shape(in);
  }

  Mat<S> forward(const Mat<S>& x, const TensorShape& in, bool train) {
    Mat<S> out = relu1.forward(bn1.forward(conv1.forward(x, in, train), train), train);
    out = bn2.forward(conv2.forward(out, conv1.out_shape(in), train), train);
    Mat<S> skip =
        has_downsample
            ? bn_ds.forward(conv_ds.forward(x, in, train), train)
            : x;
    out += skip;
    return relu2.forward(out, train);
  }

  Mat<S> backward(const Mat<S>& grad_out) {
    Mat<S> g = relu2.backward(grad_out);
    Mat<S> g_skip = has_downsample ? conv_ds.backward(bn_ds.backward(g)) : g;
    Mat<S> g_main = conv1.backward(bn1.backward(relu1.backward(
        conv2.backward(bn2.backward(g)))));
    return g_main + g_skip;
  }

  void collect(std::vector<ParamRef<S>>& out) {
    conv1.collect(out);
    bn1.collect(out);
    conv2.collect(out);
    bn2.collect(out);
    if (has_downsample) {
      conv_ds.collect(out);
      bn_ds.collect(out);
    }
  }

  void collect_buffers(std::vector<Mat<S>*>& out) {
    bn1.collect_buffers(out);
    bn2.collect_buffers(out);
    if (has_downsample) bn_ds.collect_buffers(out);
  }
};

struct NetConfig {
  int input_side = 32;
  int base_width = 16;
  int num_classes = 2;
  std::uint64_t init_seed = 0;
};

// 18-layer residual network: one stem convolution, four stages of two basic
// blocks (strides 1,2,2,2), global average pooling and a linear head.
template <typename S>
struct ResNet {
  NetConfig cfg;
  Conv2d<S> stem;
  BatchNorm2d<S> stem_bn;
  Relu<S> stem_relu;
  std::vector<BasicBlock<S>> blocks;
  Mat<S> fc_w, fc_b, grad_fc_w, grad_fc_b;
  Mat<S> m_fc_w, v_fc_w, m_fc_b, v_fc_b;
  Mat<S> pooled_cache;
  TensorShape last_shape;

  explicit ResNet(const NetConfig& config) : cfg(config) {
    Rng rng(cfg.init_seed);
    const int w = cfg.base_width;
    stem.init(3, w, 3, 1, rng);
    stem_bn.init(w);
    blocks.resize(8);
    const int widths[4] = {w, 2 * w, 4 * w, 8 * w};
    int in_c = w;
    for (int stage = 0; stage < 4; ++stage) {
      const int stride = stage == 0 ? 1 : 2;
      blocks[stage * 2].init(in_c, widths[stage], stride, rng);
      blocks[stage * 2 + 1].init(widths[stage], widths[stage], 1, rng);
      in_c = widths[stage];
    }
    fc_w.resize(cfg.num_classes, in_c);
    for (long i = 0; i < fc_w.size(); ++i) {
      fc_w.data()[i] = static_cast<S>(gaussian(rng) * 0.01);
    }
    fc_b = Mat<S>::Zero(cfg.num_classes, 1);
    grad_fc_w = Mat<S>::Zero(fc_w.rows(), fc_w.cols());
    grad_fc_b = Mat<S>::Zero(fc_b.rows(), 1);
    m_fc_w = grad_fc_w;
    v_fc_w = grad_fc_w;
    m_fc_b = grad_fc_b;
    v_fc_b = grad_fc_b;
  }

  // input: (3, batch * side * side); returns logits (num_classes, batch).
  Mat<S> forward(const Mat<S>& input, int batch, bool train) {
    TensorShape shape{batch, 3, cfg.input_side, cfg.input_side};
    Mat<S> x = stem_relu.forward(
        stem_bn.forward(stem.forward(input, shape, train), train), train);
    shape = stem.out_shape(shape);
    for (BasicBlock<S>& b : blocks) {
      x = b.forward(x, shape, train);
      shape = b.out_shape(shape);
    }
    // Global average pool to (C, batch).
    const long spatial = shape.spatial();
    Mat<S> pooled(shape.c, batch);
    for (int n = 0; n < batch; ++n) {
      pooled.col(n) =
          x.middleCols(static_cast<long>(n) * spatial, spatial).rowwise().mean();
    }
    if (train) {
      pooled_cache = pooled;
      last_shape = shape;
    }
    Mat<S> logits = fc_w * pooled;
    logits.colwise() += fc_b.col(0);
    return logits;
  }

  void backward(const Mat<S>& grad_logits) {
    grad_fc_w.noalias() += grad_logits * pooled_cache.transpose();
    grad_fc_b.col(0).noalias() += grad_logits.rowwise().sum();
    Mat<S> grad_pooled = fc_w.transpose() * grad_logits;

    const long spatial = last_shape.spatial();
    Mat<S> grad_x(last_shape.c, last_shape.cols());
    for (int n = 0; n < last_shape.n; ++n) {
      grad_x.middleCols(static_cast<long>(n) * spatial, spatial) =
          (grad_pooled.col(n) / static_cast<S>(spatial))
              .replicate(1, spatial);
    }
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
      grad_x = it->backward(grad_x);
    }
    stem.backward(stem_bn.backward(stem_relu.backward(grad_x)));
    pooled_cache.resize(0, 0);
  }

  std::vector<ParamRef<S>> params() {
    std::vector<ParamRef<S>> out;
    stem.collect(out);
    stem_bn.collect(out);
    for (BasicBlock<S>& b : blocks) b.collect(out);
    out.push_back({&fc_w, &grad_fc_w, &m_fc_w, &v_fc_w});
    out.push_back({&fc_b, &grad_fc_b, &m_fc_b, &v_fc_b});
    return out;
  }

  std::vector<Mat<S>*> buffers() {
    std::vector<Mat<S>*> out;
    stem_bn.collect_buffers(out);
    for (BasicBlock<S>& b : blocks) b.collect_buffers(out);
    return out;
  }

  void zero_grad() {
    for (ParamRef<S> p : params()) p.grad->setZero();
  }
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename S>
void adam_step(std::vector<ParamRef<S>>& params, const AdamConfig& cfg, int t) {
  const S b1 = static_cast<S>(cfg.beta1);
  const S b2 = static_cast<S>(cfg.beta2);
  const S correction1 = static_cast<S>(1.0 - std::pow(cfg.beta1, t));
  const S correction2 = static_cast<S>(1.0 - std::pow(cfg.beta2, t));
  for (ParamRef<S>& p : params) {
    *p.m = b1 * *p.m + (1 - b1) * *p.grad;
    *p.v = (b2 * p.v->array() + (1 - b2) * p.grad->array().square()).matrix();
    const auto mhat = p.m->array() / correction1;
    const auto vhat = p.v->array() / correction2;
    p.value->array() -=
        static_cast<S>(cfg.lr) * mhat / (vhat.sqrt() + static_cast<S>(cfg.eps));
  }
}

// Flat float64 serialization of all parameters and batch-norm buffers, in
// collection order.
template <typename S>
void save_net(std::ostream& out, ResNet<S>& net) {
  auto write_mat = [&out](const Mat<S>& m) {
    for (long i = 0; i < m.size(); ++i) {
      const double v = static_cast<double>(m.data()[i]);
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
  };
  for (ParamRef<S> p : net.params()) write_mat(*p.value);
  for (Mat<S>* b : net.buffers()) write_mat(*b);
}

template <typename S>
void load_net(std::istream& in, ResNet<S>& net) {
  auto read_mat = [&in](Mat<S>& m) {
    for (long i = 0; i < m.size(); ++i) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), sizeof(double));
      m.data()[i] = static_cast<S>(v);
    }
  };
  for (ParamRef<S> p : net.params()) read_mat(*p.value);
  for (Mat<S>* b : net.buffers()) read_mat(*b);
  if (!in) throw Error("truncated model data");
}

}  // namespace gaitlabel
