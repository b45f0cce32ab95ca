#pragma once

// Segmentation network stand-in: a 3-level encoder-decoder with skip
// connections, plus the blur-skip module that conditions the penultimate
// features on the predicted kernel via feature-wise scale/shift (SFT with the
// features concatenated to the conditions). The modulation initializes to
// identity (scale 1, shift 0), so enabling the skip cannot change a network's
// output until it has been trained.

#include <optional>
#include <vector>

#include "srseg/common.hpp"
#include "srseg/grid.hpp"
#include "srseg/nn/layers.hpp"
#include "srseg/nn/tensor.hpp"

namespace srseg::nn {

struct SegNetworkConfig {
  int in_channels = 1;
  int features = 12;
  int kernel_embed = 32;  // d_k
  bool blur_skip = false;
};

/// Kernel-conditioned SFT modulation: output = features * scale + shift.
class BlurSkip {
 public:
  BlurSkip(int features, int kernel_embed, uint64_t seed)
      : features_(features), embed_dim_(kernel_embed),
        embed_("skip.embed", kKernelArea, kernel_embed),
        scale_a_("skip.scale_a", features + kernel_embed, features, 3),
        scale_b_("skip.scale_b", features, features, 3),
        shift_a_("skip.shift_a", features + kernel_embed, features, 3),
        shift_b_("skip.shift_b", features, features, 3) {
    Rng rng(derive_seed(seed, 0x5f7ull));
    embed_.init_he(rng);
    scale_a_.init_he(rng);
    shift_a_.init_he(rng);
    // Identity modulation at initialization.
    scale_b_.init_constant(1.0f);
    shift_b_.init_constant(0.0f);
  }

  Tensor forward(const Tensor& features, const Tensor& kernel) {
    feat_ = features;
    Tensor e = embed_relu_.forward(embed_.forward(kernel));
    tiled_h_ = features.h;
    tiled_w_ = features.w;
    Tensor tiled(e.n, e.c, features.h, features.w);
    for (int i = 0; i < e.n; ++i)
      for (int c = 0; c < e.c; ++c) {
        const float val = e.at(i, c, 0, 0);
        for (int y = 0; y < features.h; ++y)
          for (int x = 0; x < features.w; ++x) tiled.at(i, c, y, x) = val;
      }
    Tensor cat = concat_channels(features, tiled);
    scale_ = scale_b_.forward(scale_relu_.forward(scale_a_.forward(cat)));
    Tensor shift = shift_b_.forward(shift_relu_.forward(shift_a_.forward(cat)));

    Tensor out(features.n, features.c, features.h, features.w);
    for (size_t i = 0; i < out.v.size(); ++i)
      out.v[i] = feat_.v[i] * scale_.v[i] + shift.v[i];
    return out;
  }

  struct Grads {
    Tensor dfeatures;
    Tensor dkernel;
  };

  Grads backward(const Tensor& dout) {
    Tensor dscale = dout;
    for (size_t i = 0; i < dscale.v.size(); ++i) dscale.v[i] *= feat_.v[i];
    Tensor dfeat_direct = dout;
    for (size_t i = 0; i < dfeat_direct.v.size(); ++i) dfeat_direct.v[i] *= scale_.v[i];

    Tensor dcat_s = scale_a_.backward(scale_relu_.backward(scale_b_.backward(dscale)));
    Tensor dcat_t = shift_a_.backward(shift_relu_.backward(shift_b_.backward(dout)));
    Tensor dcat = add(dcat_s, dcat_t);
    auto [dfeat_branch, dtiled] = split_channels(dcat, features_);

    Tensor de(dtiled.n, embed_dim_, 1, 1);
    for (int i = 0; i < dtiled.n; ++i)
      for (int c = 0; c < embed_dim_; ++c) {
        float acc = 0.0f;
        for (int y = 0; y < tiled_h_; ++y)
          for (int x = 0; x < tiled_w_; ++x) acc += dtiled.at(i, c, y, x);
        de.at(i, c, 0, 0) = acc;
      }

    Grads g;
    g.dkernel = embed_.backward(embed_relu_.backward(de));
    g.dfeatures = add(dfeat_direct, dfeat_branch);
    return g;
  }

  std::vector<ParamTensor*> parameters() {
    std::vector<ParamTensor*> p;
    for (Conv2d* c : {&scale_a_, &scale_b_, &shift_a_, &shift_b_}) {
      p.push_back(&c->weight_);
      p.push_back(&c->bias_);
    }
    p.push_back(&embed_.weight_);
    p.push_back(&embed_.bias_);
    return p;
  }

 private:
  int features_, embed_dim_;
  int tiled_h_ = 0, tiled_w_ = 0;
  Linear embed_;
  LeakyReLU embed_relu_;
  Conv2d scale_a_, scale_b_, shift_a_, shift_b_;
  LeakyReLU scale_relu_, shift_relu_;
  Tensor feat_, scale_;
};

class SegNetwork {
 public:
  SegNetwork(const SegNetworkConfig& cfg, uint64_t seed)
      : cfg_(cfg),
        enc1a_("seg.enc1a", cfg.in_channels, cfg.features, 3),
        enc1b_("seg.enc1b", cfg.features, cfg.features, 3),
        down1_("seg.down1", cfg.features, 2 * cfg.features, 3, 2),
        enc2_("seg.enc2", 2 * cfg.features, 2 * cfg.features, 3),
        down2_("seg.down2", 2 * cfg.features, 4 * cfg.features, 3, 2),
        bott_("seg.bott", 4 * cfg.features, 4 * cfg.features, 3),
        red2_("seg.red2", 4 * cfg.features, 2 * cfg.features, 1),
        dec2_("seg.dec2", 4 * cfg.features, 2 * cfg.features, 3),
        red1_("seg.red1", 2 * cfg.features, cfg.features, 1),
        dec1_("seg.dec1", 2 * cfg.features, cfg.features, 3),
        final_("seg.final", cfg.features, 2, 1),
        skip_(cfg.features, cfg.kernel_embed, derive_seed(seed, 0xb1u)) {
    Rng rng(derive_seed(seed, 0xc5eedull));
    for (Conv2d* c : {&enc1a_, &enc1b_, &down1_, &enc2_, &down2_, &bott_, &red2_, &dec2_,
                      &red1_, &dec1_, &final_})
      c->init_he(rng);
  }

  /// Two-class probability map; per-pixel channel softmax. When a kernel is
  /// given and the blur skip is enabled, the SFT modulation is applied to the
  /// penultimate features.
  Tensor forward(const Tensor& sr, const Tensor* kernel = nullptr) {
    if (sr.h % 4 != 0 || sr.w % 4 != 0)
      throw ParameterError("SegNetwork: input dimensions must be divisible by 4");
    Tensor s1 = relu1b_.forward(enc1b_.forward(relu1a_.forward(enc1a_.forward(sr))));
    Tensor d1 = relu_d1_.forward(down1_.forward(s1));
    Tensor s2 = relu2_.forward(enc2_.forward(d1));
    Tensor d2 = relu_d2_.forward(down2_.forward(s2));
    Tensor b = relu_b_.forward(bott_.forward(d2));

    Tensor u2 = relu_r2_.forward(red2_.forward(b));
    u2 = up2_.forward(u2);
    Tensor c2 = concat_channels(u2, s2);
    Tensor x2 = relu_dec2_.forward(dec2_.forward(c2));

    Tensor u1 = relu_r1_.forward(red1_.forward(x2));
    u1 = up1_.forward(u1);
    Tensor c1 = concat_channels(u1, s1);
    Tensor feat = relu_dec1_.forward(dec1_.forward(c1));

    used_skip_ = cfg_.blur_skip && kernel != nullptr;
    if (used_skip_) feat = skip_.forward(feat, *kernel);

    return softmax_.forward(final_.forward(feat));
  }

  struct Grads {
    Tensor dinput;              // gradient w.r.t. the SR image
    std::optional<Tensor> dkernel;  // set when the blur skip was used
  };

  Grads backward(const Tensor& dprob) {
    Tensor dfeat = final_.backward(softmax_.backward(dprob));

    Grads out;
    if (used_skip_) {
      BlurSkip::Grads sg = skip_.backward(dfeat);
      dfeat = std::move(sg.dfeatures);
      out.dkernel = std::move(sg.dkernel);
    }

    Tensor dc1 = dec1_.backward(relu_dec1_.backward(dfeat));
    auto [du1, ds1_from_dec] = split_channels(dc1, dc1.c / 2);
    Tensor dx2 = red1_.backward(relu_r1_.backward(up1_.backward(du1)));

    Tensor dc2 = dec2_.backward(relu_dec2_.backward(dx2));
    auto [du2, ds2_from_dec] = split_channels(dc2, dc2.c / 2);
    Tensor db = red2_.backward(relu_r2_.backward(up2_.backward(du2)));

    Tensor dd2 = bott_.backward(relu_b_.backward(db));
    Tensor ds2 = add(down2_.backward(relu_d2_.backward(dd2)), ds2_from_dec);
    Tensor dd1 = enc2_.backward(relu2_.backward(ds2));
    Tensor ds1 = add(down1_.backward(relu_d1_.backward(dd1)), ds1_from_dec);
    Tensor dsr = enc1a_.backward(relu1a_.backward(enc1b_.backward(relu1b_.backward(ds1))));
    out.dinput = std::move(dsr);
    return out;
  }

  // The blur-skip parameters are always registered (they receive zero
  // gradient while the skip is disabled), so checkpoints stay loadable when
  // the skip is toggled between runs.
  std::vector<ParamTensor*> parameters() {
    std::vector<ParamTensor*> p;
    for (Conv2d* c : {&enc1a_, &enc1b_, &down1_, &enc2_, &down2_, &bott_, &red2_, &dec2_,
                      &red1_, &dec1_, &final_}) {
      p.push_back(&c->weight_);
      p.push_back(&c->bias_);
    }
    for (ParamTensor* t : skip_.parameters()) p.push_back(t);
    return p;
  }

  std::vector<ParamTensor*> skip_parameters() { return skip_.parameters(); }

  const SegNetworkConfig& config() const { return cfg_; }
  void set_blur_skip(bool enabled) { cfg_.blur_skip = enabled; }

 private:
  SegNetworkConfig cfg_;
  Conv2d enc1a_, enc1b_, down1_, enc2_, down2_, bott_, red2_, dec2_, red1_, dec1_, final_;
  LeakyReLU relu1a_, relu1b_, relu_d1_, relu2_, relu_d2_, relu_b_, relu_r2_, relu_dec2_, relu_r1_,
      relu_dec1_;
  NearestUpsample2x up1_, up2_;
  ChannelSoftmax softmax_;
  BlurSkip skip_;
  bool used_skip_ = false;
};

}  // namespace srseg::nn
