#include "artmetric/nn/model.hpp"

#include <cmath>
#include <stdexcept>

namespace artmetric::nn {

int ConvNet::embedding_dim_for(const std::string& tag) {
  if (tag == "resnet18") return 512;
  if (tag == "resnet_micro") return 64;
  throw std::runtime_error("unknown architecture_tag: " + tag);
}

ConvNet::ConvNet(const std::string& tag, int num_classes)
    : tag_(tag), num_classes_(num_classes) {
  embedding_dim_ = embedding_dim_for(tag);
  if (tag == "resnet18") {
    trunk_.push_back(std::make_unique<Conv2d>(3, 64, 7, 2, 3, false));
    trunk_.push_back(std::make_unique<BatchNorm2d>(64));
    trunk_.push_back(std::make_unique<ReLU>());
    trunk_.push_back(std::make_unique<MaxPool2d>(3, 2, 1));
    const int widths[4] = {64, 128, 256, 512};
    int in_ch = 64;
    for (int stage = 0; stage < 4; ++stage) {
      const int stride = stage == 0 ? 1 : 2;
      trunk_.push_back(std::make_unique<ResidualBlock>(in_ch, widths[stage], stride));
      trunk_.push_back(std::make_unique<ResidualBlock>(widths[stage], widths[stage], 1));
      in_ch = widths[stage];
    }
  } else {  // resnet_micro
    trunk_.push_back(std::make_unique<Conv2d>(3, 16, 3, 1, 1, false));
    trunk_.push_back(std::make_unique<BatchNorm2d>(16));
    trunk_.push_back(std::make_unique<ReLU>());
    trunk_.push_back(std::make_unique<ResidualBlock>(16, 16, 1));
    trunk_.push_back(std::make_unique<ResidualBlock>(16, 32, 2));
    trunk_.push_back(std::make_unique<ResidualBlock>(32, 64, 2));
  }
  trunk_.push_back(std::make_unique<GlobalAvgPool>());
  head_ = std::make_unique<Linear>(embedding_dim_, num_classes);
}

void ConvNet::init(SeededRng& rng) {
  for (auto& l : trunk_) l->init(rng);
  head_->init(rng);
}

Tensor ConvNet::forward_features(const Tensor& x, bool train) {
  Tensor h = x;
  for (auto& l : trunk_) h = l->forward(h, train);
  return h;
}

Tensor ConvNet::forward_head(const Tensor& features, bool train) {
  return head_->forward(features, train);
}

void ConvNet::backward_features(const Tensor& dfeat) {
  Tensor g = dfeat;
  for (auto it = trunk_.rbegin(); it != trunk_.rend(); ++it) g = (*it)->backward(g);
}

void ConvNet::backward_head(const Tensor& dlogits) {
  backward_features(head_->backward(dlogits));
}

std::vector<Param*> ConvNet::params() {
  std::vector<Param*> out;
  for (auto& l : trunk_) l->collect_params(out);
  head_->collect_params(out);
  return out;
}

std::vector<Tensor*> ConvNet::state_tensors() {
  std::vector<Tensor*> out;
  for (auto& l : trunk_) l->collect_state(out);
  head_->collect_state(out);
  return out;
}

void ConvNet::zero_grads() {
  for (Param* p : params()) p->grad.zero();
}

std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tensor* dlogits, Tensor* probs) {
  const int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n)
    throw std::runtime_error("softmax_cross_entropy: label count mismatch");
  if (dlogits) *dlogits = Tensor(logits.shape);
  if (probs) *probs = Tensor(logits.shape);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> row(k);
    for (int j = 0; j < k; ++j) row[j] = logits.at(i, j);
    std::vector<double> p = softmax(row);
    loss += -std::log(std::max(p[labels[i]], 1e-30));
    for (int j = 0; j < k; ++j) {
      if (probs) probs->at(i, j) = static_cast<float>(p[j]);
      if (dlogits)
        dlogits->at(i, j) =
            static_cast<float>((p[j] - (j == labels[i] ? 1.0 : 0.0)) / n);
    }
  }
  return loss / n;
}

}  // namespace artmetric::nn
