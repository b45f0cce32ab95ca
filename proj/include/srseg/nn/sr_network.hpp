#pragma once

// Blind SR network stand-in: a small residual trunk at LR resolution, two
// nearest-neighbor x2 up-projection stages, a sigmoid image head, and a
// kernel-regression head ending in a softmax over the 441 kernel taps (which
// enforces non-negativity and unit sum).

#include <vector>

#include "srseg/common.hpp"
#include "srseg/grid.hpp"
#include "srseg/nn/layers.hpp"
#include "srseg/nn/tensor.hpp"

namespace srseg::nn {

struct SrNetworkConfig {
  int in_channels = 1;
  int features = 16;
  int blocks = 3;
  int kernel_hidden = 64;
  int min_input = 16;
};

class SrNetwork {
 public:
  struct Output {
    Tensor sr;      // (n, C, 4h, 4w), values in (0,1)
    Tensor kernel;  // (n, 441, 1, 1), non-negative, sums to 1
  };

  SrNetwork(const SrNetworkConfig& cfg, uint64_t seed)
      : cfg_(cfg),
        conv_in_("sr.in", cfg.in_channels, cfg.features, 3),
        conv_up1_("sr.up1", cfg.features, cfg.features, 3),
        conv_up2_("sr.up2", cfg.features, cfg.features, 3),
        conv_out_("sr.out", cfg.features, cfg.in_channels, 3),
        fc1_("sr.khead1", cfg.features, cfg.kernel_hidden),
        fc2_("sr.khead2", cfg.kernel_hidden, kKernelArea) {
    for (int b = 0; b < cfg.blocks; ++b) {
      const std::string base = "sr.block" + std::to_string(b);
      blocks_.emplace_back(Block{Conv2d(base + "a", cfg.features, cfg.features, 3),
                                 Conv2d(base + "b", cfg.features, cfg.features, 3), LeakyReLU{}});
    }
    Rng rng(derive_seed(seed, 0x5eedull));
    conv_in_.init_he(rng);
    for (auto& b : blocks_) {
      b.a.init_he(rng);
      b.b.init_he(rng);
    }
    conv_up1_.init_he(rng);
    conv_up2_.init_he(rng);
    conv_out_.init_he(rng);
    fc1_.init_he(rng);
    fc2_.init_he(rng);
  }

  Output forward(const Tensor& lr) {
    if (lr.h < cfg_.min_input || lr.w < cfg_.min_input)
      throw ParameterError("SrNetwork: input smaller than the supported minimum");
    Tensor t = relu_in_.forward(conv_in_.forward(lr));
    for (auto& b : blocks_) {
      Tensor r = b.b.forward(b.mid.forward(b.a.forward(t)));
      t = add(t, r);
    }

    Tensor u = relu_up1_.forward(conv_up1_.forward(up1_.forward(t)));
    u = relu_up2_.forward(conv_up2_.forward(up2_.forward(u)));
    Output out;
    out.sr = sig_.forward(conv_out_.forward(u));

    Tensor g = gap_.forward(t);
    Tensor k = relu_k_.forward(fc1_.forward(g));
    out.kernel = ksoftmax_.forward(fc2_.forward(k));
    return out;
  }

  /// Backward from gradients on the SR image and the predicted kernel.
  void backward(const Tensor& dsr, const Tensor& dkernel) {
    Tensor du = conv_out_.backward(sig_.backward(dsr));
    du = up2_.backward(conv_up2_.backward(relu_up2_.backward(du)));
    Tensor dt = up1_.backward(conv_up1_.backward(relu_up1_.backward(du)));

    Tensor dk = fc2_.backward(ksoftmax_.backward(dkernel));
    dk = fc1_.backward(relu_k_.backward(dk));
    dt = add(dt, gap_.backward(dk));

    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
      Tensor dr = it->a.backward(it->mid.backward(it->b.backward(dt)));
      dt = add(dt, dr);
    }
    conv_in_.backward(relu_in_.backward(dt));
  }

  std::vector<ParamTensor*> parameters() {
    std::vector<ParamTensor*> p{&conv_in_.weight_, &conv_in_.bias_};
    for (auto& b : blocks_) {
      p.push_back(&b.a.weight_);
      p.push_back(&b.a.bias_);
      p.push_back(&b.b.weight_);
      p.push_back(&b.b.bias_);
    }
    for (Conv2d* c : {&conv_up1_, &conv_up2_, &conv_out_}) {
      p.push_back(&c->weight_);
      p.push_back(&c->bias_);
    }
    for (Linear* l : {&fc1_, &fc2_}) {
      p.push_back(&l->weight_);
      p.push_back(&l->bias_);
    }
    return p;
  }

  const SrNetworkConfig& config() const { return cfg_; }

 private:
  struct Block {
    Conv2d a;
    Conv2d b;
    LeakyReLU mid;
  };

  SrNetworkConfig cfg_;
  Conv2d conv_in_;
  LeakyReLU relu_in_;
  std::vector<Block> blocks_;
  NearestUpsample2x up1_, up2_;
  Conv2d conv_up1_, conv_up2_, conv_out_;
  LeakyReLU relu_up1_, relu_up2_;
  Sigmoid sig_;
  GlobalAvgPool gap_;
  Linear fc1_, fc2_;
  LeakyReLU relu_k_;
  ChannelSoftmax ksoftmax_;
};

/// Predicted kernel tensor -> BlurKernel (double).
inline BlurKernel kernel_from_tensor(const Tensor& k, int item) {
  BlurKernel out;
  for (int i = 0; i < kKernelArea; ++i)
    out.v[static_cast<size_t>(i)] = static_cast<double>(k.at(item, i, 0, 0));
  return out;
}

inline void kernel_grad_to_tensor(const BlurKernel& grad, Tensor& dk, int item) {
  for (int i = 0; i < kKernelArea; ++i)
    dk.at(item, i, 0, 0) = static_cast<float>(grad.v[static_cast<size_t>(i)]);
}

}  // namespace srseg::nn
