#pragma once

#include <memory>
#include <string>
#include <vector>

#include "artmetric/core/rng.hpp"
#include "artmetric/core/tensor.hpp"

namespace artmetric::nn {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Layers own their parameters and the activations cached by the last
// forward pass. Training drives exactly one forward/backward at a time
// (single mutable training context); inference uses train=false and
// touches no cached state that matters across calls.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  // Accumulates parameter gradients, returns gradient w.r.t. input.
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void collect_params(std::vector<Param*>& out) {}
  // Everything a checkpoint must persist: parameter values plus any
  // non-trainable state (BatchNorm running statistics).
  virtual void collect_state(std::vector<Tensor*>& out);
  virtual void init(SeededRng& rng) {}
};

class Conv2d : public Layer {
 public:
  Conv2d(int in_ch, int out_ch, int k, int stride, int pad, bool bias);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  void init(SeededRng& rng) override;

 private:
  int in_ch_, out_ch_, k_, stride_, pad_;
  bool has_bias_;
  Param weight_, bias_;
  Tensor cols_;  // im2col buffers for the whole batch
  std::vector<int> in_shape_;
};

class BatchNorm2d : public Layer {
 public:
  explicit BatchNorm2d(int ch, float momentum = 0.1f, float eps = 1e-5f);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  void init(SeededRng& rng) override;

  // Running statistics are state, not trainable parameters; the checkpoint
  // writer serializes them through this accessor.
  Tensor& running_mean() { return running_mean_; }
  Tensor& running_var() { return running_var_; }
  void collect_state(std::vector<Tensor*>& out) override;

 private:
  int ch_;
  float momentum_, eps_;
  Param gamma_, beta_;
  Tensor running_mean_, running_var_;
  Tensor x_hat_, batch_inv_std_, batch_mean_;
  std::vector<int> in_shape_;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor mask_;
};

class MaxPool2d : public Layer {
 public:
  MaxPool2d(int k, int stride, int pad);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  int k_, stride_, pad_;
  std::vector<int> argmax_;
  std::vector<int> in_shape_;
};

// NCHW -> (N, C) mean over spatial positions.
class GlobalAvgPool : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  std::vector<int> in_shape_;
};

class Linear : public Layer {
 public:
  Linear(int in_dim, int out_dim);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  void init(SeededRng& rng) override;

 private:
  int in_dim_, out_dim_;
  Param weight_, bias_;
  Tensor x_;
};

// conv3x3-bn-relu-conv3x3-bn plus identity (or 1x1 conv-bn projection when
// shape changes), final relu.
class ResidualBlock : public Layer {
 public:
  ResidualBlock(int in_ch, int out_ch, int stride);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_state(std::vector<Tensor*>& out) override;
  void init(SeededRng& rng) override;

 private:
  std::unique_ptr<Conv2d> conv1_, conv2_, proj_;
  std::unique_ptr<BatchNorm2d> bn1_, bn2_, proj_bn_;
  ReLU relu1_;
  Tensor sum_mask_;  // relu mask on the residual sum
  bool has_proj_;
};

}  // namespace artmetric::nn
