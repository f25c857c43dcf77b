#include "artmetric/nn/layers.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "artmetric/core/kernels.hpp"

namespace artmetric::nn {

using kernels::conv_out;

void Layer::collect_state(std::vector<Tensor*>& out) {
  std::vector<Param*> ps;
  collect_params(ps);
  for (Param* p : ps) out.push_back(&p->value);
}

void BatchNorm2d::collect_state(std::vector<Tensor*>& out) {
  out.push_back(&gamma_.value);
  out.push_back(&beta_.value);
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

void ResidualBlock::collect_state(std::vector<Tensor*>& out) {
  conv1_->collect_state(out);
  bn1_->collect_state(out);
  conv2_->collect_state(out);
  bn2_->collect_state(out);
  if (has_proj_) {
    proj_->collect_state(out);
    proj_bn_->collect_state(out);
  }
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_ch, int out_ch, int k, int stride, int pad, bool bias)
    : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad), has_bias_(bias) {
  weight_.name = "conv.weight";
  weight_.value = Tensor({out_ch, in_ch * k * k});
  weight_.grad = Tensor({out_ch, in_ch * k * k});
  if (has_bias_) {
    bias_.name = "conv.bias";
    bias_.value = Tensor({out_ch});
    bias_.grad = Tensor({out_ch});
  }
}

void Conv2d::init(SeededRng& rng) {
  // He normal, fan_in = in_ch * k * k
  const double std = std::sqrt(2.0 / (in_ch_ * k_ * k_));
  for (auto& v : weight_.value.data) v = static_cast<float>(rng.normal() * std);
  if (has_bias_) bias_.value.zero();
}

void Conv2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

Tensor Conv2d::forward(const Tensor& x, bool train) {
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  if (x.dim(1) != in_ch_) throw std::runtime_error("Conv2d: channel mismatch");
  const int oh = conv_out(h, k_, stride_, pad_);
  const int ow = conv_out(w, k_, stride_, pad_);
  const int rows = in_ch_ * k_ * k_;
  const int cols = oh * ow;
  in_shape_ = x.shape;
  cols_ = Tensor({n, rows, cols, 1});
  Tensor y({n, out_ch_, oh, ow});
  for (int i = 0; i < n; ++i) {
    float* col = cols_.ptr() + static_cast<size_t>(i) * rows * cols;
    kernels::im2col(x.ptr() + static_cast<size_t>(i) * in_ch_ * h * w, in_ch_, h, w, k_, k_,
                    stride_, pad_, col);
    kernels::gemm_nn(out_ch_, cols, rows, weight_.value.ptr(), col,
                     y.ptr() + static_cast<size_t>(i) * out_ch_ * cols, false);
  }
  if (has_bias_) {
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < out_ch_; ++c) {
        float b = bias_.value.data[c];
        float* p = y.ptr() + (static_cast<size_t>(i) * out_ch_ + c) * cols;
        for (int j = 0; j < cols; ++j) p[j] += b;
      }
  }
  (void)train;
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  const int n = in_shape_[0], h = in_shape_[2], w = in_shape_[3];
  const int oh = dy.dim(2), ow = dy.dim(3);
  const int rows = in_ch_ * k_ * k_;
  const int cols = oh * ow;
  Tensor dx({n, in_ch_, h, w});
  Tensor dcol({rows, cols});
  for (int i = 0; i < n; ++i) {
    const float* col = cols_.ptr() + static_cast<size_t>(i) * rows * cols;
    const float* dyp = dy.ptr() + static_cast<size_t>(i) * out_ch_ * cols;
    // dW += dY * col^T
    kernels::gemm_nt(out_ch_, rows, cols, dyp, col, weight_.grad.ptr(), true);
    // dcol = W^T * dY
    kernels::gemm_tn(rows, cols, out_ch_, weight_.value.ptr(), dyp, dcol.ptr(), false);
    kernels::col2im(dcol.ptr(), in_ch_, h, w, k_, k_, stride_, pad_,
                    dx.ptr() + static_cast<size_t>(i) * in_ch_ * h * w);
    if (has_bias_) {
      for (int c = 0; c < out_ch_; ++c) {
        float s = 0.0f;
        const float* p = dyp + static_cast<size_t>(c) * cols;
        for (int j = 0; j < cols; ++j) s += p[j];
        bias_.grad.data[c] += s;
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------ BatchNorm2d

BatchNorm2d::BatchNorm2d(int ch, float momentum, float eps)
    : ch_(ch), momentum_(momentum), eps_(eps) {
  gamma_.name = "bn.gamma";
  gamma_.value = Tensor({ch});
  gamma_.grad = Tensor({ch});
  beta_.name = "bn.beta";
  beta_.value = Tensor({ch});
  beta_.grad = Tensor({ch});
  running_mean_ = Tensor({ch});
  running_var_ = Tensor({ch});
  for (auto& v : running_var_.data) v = 1.0f;
}

void BatchNorm2d::init(SeededRng&) {
  for (auto& v : gamma_.value.data) v = 1.0f;
  beta_.value.zero();
}

void BatchNorm2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const long long m = static_cast<long long>(n) * h * w;
  in_shape_ = x.shape;
  Tensor y(x.shape);
  x_hat_ = Tensor(x.shape);
  batch_mean_ = Tensor({ch_});
  batch_inv_std_ = Tensor({ch_});
  for (int c = 0; c < ch_; ++c) {
    double mean, var;
    if (train) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        const float* p = x.ptr() + (static_cast<size_t>(i) * ch_ + c) * h * w;
        for (long long j = 0; j < static_cast<long long>(h) * w; ++j) s += p[j];
      }
      mean = s / m;
      double sv = 0.0;
      for (int i = 0; i < n; ++i) {
        const float* p = x.ptr() + (static_cast<size_t>(i) * ch_ + c) * h * w;
        for (long long j = 0; j < static_cast<long long>(h) * w; ++j) {
          const double d = p[j] - mean;
          sv += d * d;
        }
      }
      var = sv / m;  // biased, as used for normalization
      running_mean_.data[c] =
          (1.0f - momentum_) * running_mean_.data[c] + momentum_ * static_cast<float>(mean);
      running_var_.data[c] =
          (1.0f - momentum_) * running_var_.data[c] + momentum_ * static_cast<float>(var);
    } else {
      mean = running_mean_.data[c];
      var = running_var_.data[c];
    }
    const float inv_std = static_cast<float>(1.0 / std::sqrt(var + eps_));
    batch_mean_.data[c] = static_cast<float>(mean);
    batch_inv_std_.data[c] = inv_std;
    const float g = gamma_.value.data[c], b = beta_.value.data[c];
    for (int i = 0; i < n; ++i) {
      const float* p = x.ptr() + (static_cast<size_t>(i) * ch_ + c) * h * w;
      float* xh = x_hat_.ptr() + (static_cast<size_t>(i) * ch_ + c) * h * w;
      float* yp = y.ptr() + (static_cast<size_t>(i) * ch_ + c) * h * w;
      for (long long j = 0; j < static_cast<long long>(h) * w; ++j) {
        xh[j] = (p[j] - static_cast<float>(mean)) * inv_std;
        yp[j] = g * xh[j] + b;
      }
    }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
  const int n = in_shape_[0], h = in_shape_[2], w = in_shape_[3];
  const long long m = static_cast<long long>(n) * h * w;
  Tensor dx(in_shape_);
  for (int c = 0; c < ch_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int i = 0; i < n; ++i) {
      const float* d = dy.ptr() + (static_cast<size_t>(i) * ch_ + c) * h * w;
      const float* xh = x_hat_.ptr() + (static_cast<size_t>(i) * ch_ + c) * h * w;
      for (long long j = 0; j < static_cast<long long>(h) * w; ++j) {
        sum_dy += d[j];
        sum_dy_xhat += static_cast<double>(d[j]) * xh[j];
      }
    }
    gamma_.grad.data[c] += static_cast<float>(sum_dy_xhat);
    beta_.grad.data[c] += static_cast<float>(sum_dy);
    const float g = gamma_.value.data[c];
    const float inv_std = batch_inv_std_.data[c];
    for (int i = 0; i < n; ++i) {
      const float* d = dy.ptr() + (static_cast<size_t>(i) * ch_ + c) * h * w;
      const float* xh = x_hat_.ptr() + (static_cast<size_t>(i) * ch_ + c) * h * w;
      float* dxp = dx.ptr() + (static_cast<size_t>(i) * ch_ + c) * h * w;
      for (long long j = 0; j < static_cast<long long>(h) * w; ++j) {
        dxp[j] = g * inv_std *
                 (d[j] - static_cast<float>(sum_dy / m) -
                  xh[j] * static_cast<float>(sum_dy_xhat / m));
      }
    }
  }
  return dx;
}

// ----------------------------------------------------------------- ReLU

Tensor ReLU::forward(const Tensor& x, bool) {
  Tensor y(x.shape);
  mask_ = Tensor(x.shape);
  for (size_t i = 0; i < x.size(); ++i) {
    const bool pos = x.data[i] > 0.0f;
    mask_.data[i] = pos ? 1.0f : 0.0f;
    y.data[i] = pos ? x.data[i] : 0.0f;
  }
  return y;
}

Tensor ReLU::backward(const Tensor& dy) {
  Tensor dx(dy.shape);
  for (size_t i = 0; i < dy.size(); ++i) dx.data[i] = dy.data[i] * mask_.data[i];
  return dx;
}

// -------------------------------------------------------------- MaxPool2d

MaxPool2d::MaxPool2d(int k, int stride, int pad) : k_(k), stride_(stride), pad_(pad) {}

Tensor MaxPool2d::forward(const Tensor& x, bool) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = conv_out(h, k_, stride_, pad_);
  const int ow = conv_out(w, k_, stride_, pad_);
  in_shape_ = x.shape;
  Tensor y({n, c, oh, ow});
  argmax_.assign(y.size(), -1);
  size_t o = 0;
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc) {
      const float* plane = x.ptr() + (static_cast<size_t>(i) * c + cc) * h * w;
      for (int y0 = 0; y0 < oh; ++y0)
        for (int x0 = 0; x0 < ow; ++x0, ++o) {
          float best = -std::numeric_limits<float>::infinity();
          int best_idx = -1;
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = y0 * stride_ + ky - pad_;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < k_; ++kx) {
              const int ix = x0 * stride_ + kx - pad_;
              if (ix < 0 || ix >= w) continue;
              const int idx = iy * w + ix;
              if (plane[idx] > best) {
                best = plane[idx];
                best_idx = idx;
              }
            }
          }
          y.data[o] = best;
          argmax_[o] = best_idx;
        }
    }
  return y;
}

Tensor MaxPool2d::backward(const Tensor& dy) {
  const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
  const int plane = h * w;
  Tensor dx(in_shape_);
  const int oplane = dy.dim(2) * dy.dim(3);
  size_t o = 0;
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc) {
      float* dplane = dx.ptr() + (static_cast<size_t>(i) * c + cc) * plane;
      for (int j = 0; j < oplane; ++j, ++o)
        if (argmax_[o] >= 0) dplane[argmax_[o]] += dy.data[o];
    }
  return dx;
}

// ---------------------------------------------------------- GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x, bool) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  in_shape_ = x.shape;
  Tensor y({n, c});
  const float inv = 1.0f / (h * w);
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc) {
      const float* p = x.ptr() + (static_cast<size_t>(i) * c + cc) * h * w;
      float s = 0.0f;
      for (int j = 0; j < h * w; ++j) s += p[j];
      y.at(i, cc) = s * inv;
    }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
  const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
  Tensor dx(in_shape_);
  const float inv = 1.0f / (h * w);
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc) {
      float* p = dx.ptr() + (static_cast<size_t>(i) * c + cc) * h * w;
      const float g = dy.at(i, cc) * inv;
      for (int j = 0; j < h * w; ++j) p[j] = g;
    }
  return dx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_dim, int out_dim) : in_dim_(in_dim), out_dim_(out_dim) {
  weight_.name = "linear.weight";
  weight_.value = Tensor({out_dim, in_dim});
  weight_.grad = Tensor({out_dim, in_dim});
  bias_.name = "linear.bias";
  bias_.value = Tensor({out_dim});
  bias_.grad = Tensor({out_dim});
}

void Linear::init(SeededRng& rng) {
  const double bound = std::sqrt(6.0 / (in_dim_ + out_dim_));
  for (auto& v : weight_.value.data)
    v = static_cast<float>((rng.uniform() * 2.0 - 1.0) * bound);
  bias_.value.zero();
}

void Linear::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

Tensor Linear::forward(const Tensor& x, bool) {
  const int n = x.dim(0);
  if (x.dim(1) != in_dim_) throw std::runtime_error("Linear: dim mismatch");
  x_ = x;
  Tensor y({n, out_dim_});
  // y = x * W^T
  kernels::gemm_nt(n, out_dim_, in_dim_, x.ptr(), weight_.value.ptr(), y.ptr(), false);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < out_dim_; ++j) y.at(i, j) += bias_.value.data[j];
  return y;
}

Tensor Linear::backward(const Tensor& dy) {
  const int n = dy.dim(0);
  // dW += dY^T * X
  kernels::gemm_tn(out_dim_, in_dim_, n, dy.ptr(), x_.ptr(), weight_.grad.ptr(), true);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < out_dim_; ++j) bias_.grad.data[j] += dy.at(i, j);
  Tensor dx({n, in_dim_});
  // dX = dY * W
  kernels::gemm_nn(n, in_dim_, out_dim_, dy.ptr(), weight_.value.ptr(), dx.ptr(), false);
  return dx;
}

// ------------------------------------------------------------ ResidualBlock

ResidualBlock::ResidualBlock(int in_ch, int out_ch, int stride)
    : has_proj_(stride != 1 || in_ch != out_ch) {
  conv1_ = std::make_unique<Conv2d>(in_ch, out_ch, 3, stride, 1, false);
  bn1_ = std::make_unique<BatchNorm2d>(out_ch);
  conv2_ = std::make_unique<Conv2d>(out_ch, out_ch, 3, 1, 1, false);
  bn2_ = std::make_unique<BatchNorm2d>(out_ch);
  if (has_proj_) {
    proj_ = std::make_unique<Conv2d>(in_ch, out_ch, 1, stride, 0, false);
    proj_bn_ = std::make_unique<BatchNorm2d>(out_ch);
  }
}

void ResidualBlock::init(SeededRng& rng) {
  conv1_->init(rng);
  bn1_->init(rng);
  conv2_->init(rng);
  bn2_->init(rng);
  if (has_proj_) {
    proj_->init(rng);
    proj_bn_->init(rng);
  }
}

void ResidualBlock::collect_params(std::vector<Param*>& out) {
  conv1_->collect_params(out);
  bn1_->collect_params(out);
  conv2_->collect_params(out);
  bn2_->collect_params(out);
  if (has_proj_) {
    proj_->collect_params(out);
    proj_bn_->collect_params(out);
  }
}

Tensor ResidualBlock::forward(const Tensor& x, bool train) {
  Tensor h = relu1_.forward(bn1_->forward(conv1_->forward(x, train), train), train);
  Tensor main = bn2_->forward(conv2_->forward(h, train), train);
  Tensor skip = has_proj_ ? proj_bn_->forward(proj_->forward(x, train), train) : x;
  Tensor y(main.shape);
  sum_mask_ = Tensor(main.shape);
  for (size_t i = 0; i < y.size(); ++i) {
    const float s = main.data[i] + skip.data[i];
    const bool pos = s > 0.0f;
    sum_mask_.data[i] = pos ? 1.0f : 0.0f;
    y.data[i] = pos ? s : 0.0f;
  }
  return y;
}

Tensor ResidualBlock::backward(const Tensor& dy) {
  Tensor ds(dy.shape);
  for (size_t i = 0; i < dy.size(); ++i) ds.data[i] = dy.data[i] * sum_mask_.data[i];
  Tensor dmain = conv1_->backward(bn1_->backward(relu1_.backward(conv2_->backward(bn2_->backward(ds)))));
  Tensor dskip = has_proj_ ? proj_->backward(proj_bn_->backward(ds)) : ds;
  for (size_t i = 0; i < dmain.size(); ++i) dmain.data[i] += dskip.data[i];
  return dmain;
}

}  // namespace artmetric::nn
