#pragma once

#include <memory>
#include <string>
#include <vector>

#include "artmetric/nn/layers.hpp"

namespace artmetric::nn {

// Residual feature extractor plus a linear classification head. The head is
// only used by the discriminative task; the metric stage reads the pooled
// features (the embedding).
//
// architecture_tag:
//   "resnet18"     stem 7x7/64 + maxpool, stages [2,2,2,2] x {64,128,256,512} -> 512-dim
//   "resnet_micro" stem 3x3/16, stages [1,1,1] x {16,32,64}                  -> 64-dim
class ConvNet {
 public:
  ConvNet(const std::string& architecture_tag, int num_classes);

  void init(SeededRng& rng);

  // (N, 3, H, W) -> (N, embedding_dim)
  Tensor forward_features(const Tensor& x, bool train);
  // features -> (N, num_classes) logits
  Tensor forward_head(const Tensor& features, bool train);

  // Backprop from feature gradient through the trunk (metric training).
  void backward_features(const Tensor& dfeat);
  // Backprop from logit gradient through head and trunk.
  void backward_head(const Tensor& dlogits);

  std::vector<Param*> params();          // trainable
  std::vector<Tensor*> state_tensors();  // trainable values + BN running stats
  void zero_grads();

  int embedding_dim() const { return embedding_dim_; }
  int num_classes() const { return num_classes_; }
  const std::string& architecture_tag() const { return tag_; }

  static int embedding_dim_for(const std::string& architecture_tag);

 private:
  std::string tag_;
  int num_classes_;
  int embedding_dim_;
  std::vector<std::unique_ptr<Layer>> trunk_;
  std::vector<BatchNorm2d*> bns_;
  std::unique_ptr<Linear> head_;
};

// Mean softmax cross-entropy over a batch; fills dlogits (dL/dlogits) and
// probs (softmax rows) when non-null.
double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tensor* dlogits, Tensor* probs);

// Softmax of a single logit row vector.
std::vector<double> softmax(const std::vector<double>& logits);

}  // namespace artmetric::nn
