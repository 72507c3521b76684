#include "evhdr/network.hpp"

#include <cmath>
#include <numeric>

namespace evhdr::net {

namespace F = torch::nn::functional;

namespace {

torch::nn::Conv2d make_conv(int in, int out, int kernel, int stride = 1,
                            int dilation = 1) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel)
                               .stride(stride)
                               .padding(dilation * (kernel / 2))
                               .padding_mode(torch::kReflect)
                               .dilation(dilation));
}

torch::Tensor lrelu(const torch::Tensor& x, double slope) {
  return torch::leaky_relu(x, slope);
}

torch::Tensor upsample_to(const torch::Tensor& x, const torch::Tensor& like) {
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{like.size(2), like.size(3)})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

// Pyramid levels are stacked as (N * slots, C, h, w); these pick slots out.
Pyramid pick(const Pyramid& p, int64_t n, int64_t slots,
             const std::vector<int64_t>& which) {
  Pyramid out;
  const auto idx = torch::tensor(which, torch::kLong);
  for (int l = 0; l < 3; ++l) {
    const auto& t = p[l];
    out[l] = t.view({n, slots, t.size(1), t.size(2), t.size(3)})
                 .index_select(1, idx)
                 .flatten(0, 1);
  }
  return out;
}

Pyramid repeat_slot(const Pyramid& p, int64_t n, int64_t slots, int64_t slot,
                    int64_t times) {
  Pyramid out;
  for (int l = 0; l < 3; ++l) {
    const auto& t = p[l];
    out[l] = t.view({n, slots, t.size(1), t.size(2), t.size(3)})
                 .select(1, slot)
                 .unsqueeze(1)
                 .expand({n, times, t.size(1), t.size(2), t.size(3)})
                 .reshape({n * times, t.size(1), t.size(2), t.size(3)});
  }
  return out;
}

Pyramid detach(const Pyramid& p) {
  return {p[0].detach(), p[1].detach(), p[2].detach()};
}

torch::Tensor stack_slots(const std::vector<const BracketSample*>& samples,
                          const std::function<const Image&(const BracketSample&, int)>& get) {
  std::vector<torch::Tensor> per_sample;
  for (const auto* s : samples) {
    std::vector<torch::Tensor> slots;
    for (int i = 0; i < 3; ++i) slots.push_back(image_to_tensor(get(*s, i)));
    per_sample.push_back(torch::stack(slots));
  }
  return torch::stack(per_sample);
}

torch::Tensor voxels_to_tensor(const VoxelGrid& g) {
  return torch::from_blob(const_cast<float*>(g.values.data()),
                          {g.bins, g.height, g.width}, torch::kFloat32)
      .clone();
}

}  // namespace

void NetworkConfig::validate() const {
  if (channels < 1 || image_channels < 1 || bins < 1) {
    throw InvalidInput("NetworkConfig: channel and bin counts must be positive");
  }
  if (offset_groups < 1 || channels % offset_groups != 0) {
    throw InvalidInput("NetworkConfig: offset groups must divide channels");
  }
  if (windows < 3) throw InvalidInput("NetworkConfig: need at least 3 windows");
}

void AblationConfig::validate() const {
  if (use_distillation && !use_event_subsampling) {
    throw InvalidInput("AblationConfig: distillation requires event sub-sampling");
  }
  if (use_event_subsampling && !use_event_alignment) {
    throw InvalidInput("AblationConfig: event sub-sampling requires event alignment");
  }
}

std::string AblationConfig::label() const {
  if (use_distillation) return "+ Event-to-image distill.";
  if (use_event_subsampling) return "+ Event sub-sampling";
  if (use_event_alignment) return "+ Event alignment";
  return "Images-only";
}

torch::Tensor image_to_tensor(const Image& img) {
  return torch::from_blob(const_cast<float*>(img.data.data()),
                          {img.height, img.width, img.channels}, torch::kFloat32)
      .permute({2, 0, 1})
      .contiguous();
}

Image tensor_to_image(const torch::Tensor& chw) {
  const auto t = chw.detach().to(torch::kFloat32).permute({1, 2, 0}).contiguous();
  Image img(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)),
            static_cast<int>(t.size(2)));
  std::memcpy(img.data.data(), t.data_ptr<float>(), img.data.size() * sizeof(float));
  return img;
}

NetworkInput NetworkInput::to(torch::Dtype dtype) const {
  NetworkInput o = *this;
  o.ldr = ldr.to(dtype);
  o.linear = linear.to(dtype);
  o.keyframe_events = keyframe_events.to(dtype);
  o.windows = windows.to(dtype);
  return o;
}

NetworkInput make_input(const std::vector<const BracketSample*>& samples) {
  if (samples.empty()) throw InvalidInput("make_input: empty batch");
  for (const auto* s : samples) {
    if (!s->has_voxels()) throw InvalidInput("make_input: sample has no voxel inputs");
    if (s->height() != samples.front()->height() || s->width() != samples.front()->width()) {
      throw InvalidInput("make_input: samples in a batch must share a size");
    }
  }
  NetworkInput in;
  in.ldr = stack_slots(samples, [](const BracketSample& s, int i) -> const Image& {
    return s.ldr[i].pixels;
  });
  in.linear = stack_slots(samples, [](const BracketSample& s, int i) -> const Image& {
    return s.linear[i].pixels;
  });
  std::vector<torch::Tensor> key, win;
  for (const auto* s : samples) {
    std::vector<torch::Tensor> k, w;
    for (const auto& g : s->keyframe_voxels) k.push_back(voxels_to_tensor(g));
    for (const auto& g : s->windows.windows) w.push_back(voxels_to_tensor(g));
    key.push_back(torch::stack(k));
    win.push_back(torch::stack(w));
  }
  in.keyframe_events = torch::stack(key);
  in.windows = torch::stack(win);
  in.keyframe_windows = samples.front()->windows.keyframe_indices;
  return in;
}

NetworkInput make_input(const BracketSample& sample) {
  return make_input(std::vector<const BracketSample*>{&sample});
}

torch::Tensor deform_conv2d(const torch::Tensor& input, const torch::Tensor& offsets,
                            const torch::Tensor& weight, const torch::Tensor& bias,
                            int offset_groups, int dilation) {
  constexpr int64_t kTaps = 9;
  if (input.dim() != 4 || offsets.dim() != 4 || weight.dim() != 4) {
    throw InvalidInput("deform_conv2d: expected 4-D input, offsets and weight");
  }
  const int64_t n = input.size(0);
  const int64_t c = input.size(1);
  const int64_t h = input.size(2);
  const int64_t w = input.size(3);
  const int64_t g = offset_groups;
  if (g < 1 || c % g != 0) throw InvalidInput("deform_conv2d: groups must divide channels");
  if (offsets.size(0) != n || offsets.size(1) != 2 * g * kTaps || offsets.size(2) != h ||
      offsets.size(3) != w) {
    throw InvalidInput("deform_conv2d: offsets must be (N, 2*G*9, H, W)");
  }
  if (weight.size(1) != c || weight.size(2) != 3 || weight.size(3) != 3) {
    throw InvalidInput("deform_conv2d: weight must be (Cout, C, 3, 3)");
  }
  const auto opts = input.options();
  const auto ky = (torch::arange(3, opts).repeat_interleave(3) - 1) * dilation;
  const auto kx = (torch::arange(3, opts).repeat({3}) - 1) * dilation;
  const auto off = offsets.view({n, g, kTaps, 2, h, w});
  const auto py = torch::arange(h, opts).view({1, 1, 1, h, 1}) + ky.view({1, 1, kTaps, 1, 1}) +
                  off.select(3, 0);
  const auto px = torch::arange(w, opts).view({1, 1, 1, 1, w}) + kx.view({1, 1, kTaps, 1, 1}) +
                  off.select(3, 1);
  // Pixel centers under align_corners=false: coordinate p maps to (2p+1)/size - 1.
  const auto gx = (2.0 * px + 1.0) / static_cast<double>(w) - 1.0;
  const auto gy = (2.0 * py + 1.0) / static_cast<double>(h) - 1.0;
  const auto grid = torch::stack({gx, gy}, -1).view({n * g, kTaps * h, w, 2});
  const auto sampled = F::grid_sample(input.reshape({n * g, c / g, h, w}), grid,
                                      F::GridSampleFuncOptions()
                                          .mode(torch::kBilinear)
                                          .padding_mode(torch::kZeros)
                                          .align_corners(false));
  const auto columns = sampled.reshape({n, c * kTaps, h * w});
  auto out = torch::matmul(weight.reshape({weight.size(0), c * kTaps}), columns);
  if (bias.defined()) out = out + bias.view({1, -1, 1});
  return out.view({n, weight.size(0), h, w});
}

ResidualBlockImpl::ResidualBlockImpl(int channels) {
  conv1_ = register_module("conv1", make_conv(channels, channels, 3));
  conv2_ = register_module("conv2", make_conv(channels, channels, 3));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  return x + conv2_(torch::relu(conv1_(x)));
}

PyramidEncoderImpl::PyramidEncoderImpl(int in_channels, int channels, double slope)
    : in_channels_(in_channels), slope_(slope) {
  head_ = register_module("head", make_conv(in_channels, channels, 1));
  res_ = register_module("res", ResidualBlock(channels));
  down1_ = register_module("down1", make_conv(channels, channels, 3, 2));
  conv1_ = register_module("conv1", make_conv(channels, channels, 3));
  down2_ = register_module("down2", make_conv(channels, channels, 3, 2));
  conv2_ = register_module("conv2", make_conv(channels, channels, 3));
}

Pyramid PyramidEncoderImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != in_channels_) {
    throw InvalidInput("encode_pyramid: expected (N, " + std::to_string(in_channels_) +
                       ", H, W) input");
  }
  if (x.size(2) % 4 != 0 || x.size(3) % 4 != 0 || x.size(2) < 8 || x.size(3) < 8) {
    throw InvalidInput("encode_pyramid: spatial size must be a multiple of 4, at least 8");
  }
  Pyramid p;
  p[0] = res_(lrelu(head_(x), slope_));
  p[1] = lrelu(conv1_(lrelu(down1_(p[0]), slope_)), slope_);
  p[2] = lrelu(conv2_(lrelu(down2_(p[1]), slope_)), slope_);
  return p;
}

LdrAttentionImpl::LdrAttentionImpl(int channels, double slope) : slope_(slope) {
  conv_a = register_module("conv_a", make_conv(2 * channels, channels, 3));
  conv_b = register_module("conv_b", make_conv(channels, channels, 3));
}

torch::Tensor LdrAttentionImpl::attention_map(const torch::Tensor& f_i,
                                              const torch::Tensor& f_ref) {
  if (!f_i.sizes().equals(f_ref.sizes())) {
    throw InvalidInput("attention: feature shapes differ");
  }
  return torch::sigmoid(conv_b(lrelu(conv_a(torch::cat({f_i, f_ref}, 1)), slope_)));
}

torch::Tensor LdrAttentionImpl::forward(const torch::Tensor& f_i, const torch::Tensor& f_ref) {
  return f_i * attention_map(f_i, f_ref);
}

DeformConv2dImpl::DeformConv2dImpl(int in_channels, int out_channels, int offset_groups)
    : groups_(offset_groups) {
  weight = register_parameter("weight", torch::empty({out_channels, in_channels, 3, 3}));
  bias = register_parameter("bias", torch::empty({out_channels}));
  // Same fan-in scaled init as torch::nn::Conv2d.
  torch::nn::init::kaiming_uniform_(weight, std::sqrt(5.0));
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * 9));
  torch::nn::init::uniform_(bias, -bound, bound);
}

torch::Tensor DeformConv2dImpl::forward(const torch::Tensor& x, const torch::Tensor& offsets) {
  return deform_conv2d(x, offsets, weight, bias, groups_);
}

PcdAlignImpl::PcdAlignImpl(int channels, int offset_groups, double slope) : slope_(slope) {
  const int off_ch = 2 * offset_groups * 9;
  for (int l = 0; l < 3; ++l) {
    const auto s = std::to_string(l);
    offset_a_[l] = register_module("offset_a" + s, make_conv(2 * channels, channels, 3));
    offset_out_[l] = register_module("offset_out" + s, make_conv(channels, off_ch, 3));
    // Zero offsets at start: alignment begins as a plain convolution.
    torch::NoGradGuard guard;
    offset_out_[l]->weight.zero_();
    offset_out_[l]->bias.zero_();
    dcn_[l] = register_module("dcn" + s, DeformConv2d(channels, channels, offset_groups));
    if (l < 2) {
      offset_b_[l] = register_module("offset_b" + s, make_conv(2 * channels, channels, 3));
      merge_[l] = register_module("merge" + s, make_conv(2 * channels, channels, 3));
    }
  }
}

Pyramid PcdAlignImpl::forward(const Pyramid& src, const Pyramid& ref) {
  for (int l = 0; l < 3; ++l) {
    if (!src[l].sizes().equals(ref[l].sizes())) {
      throw InvalidInput("pcd_align: pyramid shapes differ at level " + std::to_string(l));
    }
  }
  Pyramid out;
  torch::Tensor prev_feat, prev_offset_feat, prev_offsets;
  for (int l = 2; l >= 0; --l) {
    auto off_feat = lrelu(offset_a_[l](torch::cat({src[l], ref[l]}, 1)), slope_);
    if (l < 2) {
      off_feat = lrelu(
          offset_b_[l](torch::cat({off_feat, upsample_to(prev_offset_feat, off_feat)}, 1)),
          slope_);
    }
    auto offsets = offset_out_[l](off_feat);
    if (l < 2) offsets = offsets + 2.0 * upsample_to(prev_offsets, offsets);
    auto feat = dcn_[l](src[l], offsets);
    if (l < 2) feat = merge_[l](torch::cat({feat, upsample_to(prev_feat, feat)}, 1));
    feat = lrelu(feat, slope_);
    out[l] = feat;
    last_offsets_[l] = offsets;
    prev_feat = feat;
    prev_offset_feat = off_feat;
    prev_offsets = offsets;
  }
  return out;
}

DrdbImpl::DrdbImpl(int channels, double slope) : slope_(slope) {
  dilated_ = register_module("dilated", make_conv(channels, channels, 3, 1, 2));
  pointwise_ = register_module("pointwise", make_conv(channels, channels, 1));
}

torch::Tensor DrdbImpl::forward(const torch::Tensor& x) {
  return x + pointwise_(lrelu(dilated_(x), slope_));
}

FusionNetImpl::FusionNetImpl(int branches, int channels, int out_channels, double slope)
    : in_channels_(branches * channels), slope_(slope) {
  fuse_in_ = register_module("fuse_in", make_conv(in_channels_, channels, 3));
  for (int i = 0; i < 3; ++i) {
    blocks_[i] = register_module("drdb" + std::to_string(i), Drdb(channels, slope));
  }
  tail_a_ = register_module("tail_a", make_conv(channels, channels, 3));
  tail_b_ = register_module("tail_b", make_conv(channels, out_channels, 3));
  // Start every output channel above the ReLU threshold.
  torch::NoGradGuard guard;
  tail_b_->weight.mul_(0.1);
  tail_b_->bias.fill_(0.05);
}

torch::Tensor FusionNetImpl::forward(const torch::Tensor& stacked, const torch::Tensor& f_ref) {
  if (stacked.size(1) != in_channels_) {
    throw InvalidInput("fuse_reconstruct: expected " + std::to_string(in_channels_) +
                       " input channels, got " + std::to_string(stacked.size(1)));
  }
  if (stacked.size(2) != f_ref.size(2) || stacked.size(3) != f_ref.size(3)) {
    throw InvalidInput("fuse_reconstruct: spatial size mismatch");
  }
  const auto x0 = lrelu(fuse_in_(stacked), slope_);
  auto x = x0;
  for (auto& b : blocks_) x = b(x);
  x = x + x0 + f_ref;
  return torch::relu(tail_b_(lrelu(tail_a_(x), slope_)));
}

DistillBranchImpl::DistillBranchImpl(int bins, int channels, int offset_groups, double slope) {
  encoder = register_module("encoder", PyramidEncoder(bins, channels, slope));
  aligner = register_module("align", PcdAlign(channels, offset_groups, slope));
}

HdrNetImpl::HdrNetImpl(NetworkConfig cfg, AblationConfig ablation)
    : cfg_(cfg), ablation_(ablation) {
  cfg_.validate();
  ablation_.validate();
  const int c = cfg_.channels;
  const double s = cfg_.leaky_slope;
  encoder_I = register_module("encoder_I", make_conv(cfg_.image_channels, c, 3));
  attention = register_module("attention", LdrAttention(c, s));
  encoder_L = register_module("encoder_L", PyramidEncoder(cfg_.image_channels, c, s));
  pcd_L = register_module("pcd_L", PcdAlign(c, cfg_.offset_groups, s));
  if (ablation_.use_event_alignment) {
    encoder_E = register_module("encoder_E", PyramidEncoder(cfg_.bins, c, s));
    pcd_E = register_module("pcd_E", PcdAlign(c, cfg_.offset_groups, s));
  }
  if (ablation_.use_distillation) {
    distill_E = register_module("distill_E", DistillBranch(cfg_.bins, c, cfg_.offset_groups, s));
  }
  fusion = register_module("fusion", FusionNet(fusion_branches(), c, cfg_.image_channels, s));
}

int HdrNetImpl::fusion_branches() const {
  int n = 6;
  if (ablation_.use_event_alignment) n += 3;
  if (ablation_.use_event_subsampling) n += cfg_.intermediate_windows();
  return n;
}

int64_t HdrNetImpl::parameter_count() const {
  int64_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

std::map<std::string, std::vector<torch::Tensor>> HdrNetImpl::parameter_groups() const {
  std::map<std::string, std::vector<torch::Tensor>> groups;
  for (const char* name : kParameterGroups) groups[name];
  for (const auto& item : named_parameters(true)) {
    const auto& key = item.key();
    groups[key.substr(0, key.find('.'))].push_back(item.value());
  }
  return groups;
}

void HdrNetImpl::check_input(const NetworkInput& in) const {
  if (!in.ldr.defined() || in.ldr.dim() != 5 || in.ldr.size(1) != 3 ||
      in.ldr.size(2) != cfg_.image_channels) {
    throw InvalidInput("forward: ldr must be (N, 3, C, H, W)");
  }
  if (!in.linear.sizes().equals(in.ldr.sizes())) {
    throw InvalidInput("forward: linear images must match the LDR shape");
  }
  const auto n = in.batch();
  const auto h = in.height();
  const auto w = in.width();
  if (h % 4 != 0 || w % 4 != 0 || h < 8 || w < 8) {
    throw InvalidInput("forward: spatial size must be a multiple of 4, at least 8");
  }
  if (ablation_.use_event_alignment) {
    const auto& e = in.keyframe_events;
    if (!e.defined() || e.dim() != 5 || e.size(0) != n || e.size(1) != 3 ||
        e.size(2) != cfg_.bins || e.size(3) != h || e.size(4) != w) {
      throw InvalidInput("forward: keyframe events must be (N, 3, B, H, W)");
    }
  }
  if (ablation_.use_event_subsampling) {
    const auto& win = in.windows;
    if (!win.defined() || win.dim() != 5 || win.size(0) != n || win.size(1) != cfg_.windows ||
        win.size(2) != cfg_.bins || win.size(3) != h || win.size(4) != w) {
      throw InvalidInput("forward: windows must be (N, " + std::to_string(cfg_.windows) +
                         ", B, H, W)");
    }
    if (in.keyframe_windows.size() != 3) {
      throw InvalidInput("forward: window stride must yield exactly 3 keyframe windows");
    }
  }
}

ForwardResult HdrNetImpl::forward(const NetworkInput& in,
                                  const std::vector<Pyramid>* frozen_targets) {
  check_input(in);
  const int64_t n = in.batch();
  const int64_t c = cfg_.channels;
  const int64_t h = in.height();
  const int64_t w = in.width();
  const double slope = cfg_.leaky_slope;
  ForwardResult r;

  // LDR features with spatial attention against the reference exposure.
  const auto f_ldr = lrelu(encoder_I(in.ldr.flatten(0, 1)), slope).view({n, 3, c, h, w});
  const auto f_ldr_ref = f_ldr.select(1, 1);
  const auto attended =
      attention(torch::cat({f_ldr.select(1, 0), f_ldr.select(1, 2)}, 0),
                torch::cat({f_ldr_ref, f_ldr_ref}, 0))
          .chunk(2, 0);
  r.branches.emplace_back("ldr_attention_1", attended[0]);
  r.branches.emplace_back("ldr_reference", f_ldr_ref);
  r.branches.emplace_back("ldr_attention_3", attended[1]);

  // Linear images, deformably aligned to the reference.
  const Pyramid pyr_lin = encoder_L(in.linear.flatten(0, 1));
  const auto lin_aligned =
      pcd_L(pick(pyr_lin, n, 3, {0, 2}), repeat_slot(pyr_lin, n, 3, 1, 2))[0].view({n, 2, c, h, w});
  const auto f_lin_ref = pyr_lin[0].view({n, 3, c, h, w}).select(1, 1);
  r.branches.emplace_back("linear_aligned_1", lin_aligned.select(1, 0));
  r.branches.emplace_back("linear_reference", f_lin_ref);
  r.branches.emplace_back("linear_aligned_3", lin_aligned.select(1, 1));

  Pyramid pyr_ev;
  if (ablation_.use_event_alignment) {
    pyr_ev = encoder_E(in.keyframe_events.flatten(0, 1));
    const auto ev_aligned =
        pcd_E(pick(pyr_ev, n, 3, {0, 2}), repeat_slot(pyr_ev, n, 3, 1, 2))[0].view({n, 2, c, h, w});
    r.branches.emplace_back("event_aligned_1", ev_aligned.select(1, 0));
    r.branches.emplace_back("event_reference", pyr_ev[0].view({n, 3, c, h, w}).select(1, 1));
    r.branches.emplace_back("event_aligned_3", ev_aligned.select(1, 1));
  }

  if (ablation_.use_event_subsampling) {
    const int64_t n_win = in.windows.size(1);
    std::vector<int64_t> inter;
    for (int64_t i = 0; i < n_win; ++i) {
      if (std::find(in.keyframe_windows.begin(), in.keyframe_windows.end(), i) ==
          in.keyframe_windows.end()) {
        inter.push_back(i);
      }
    }
    const auto n_inter = static_cast<int64_t>(inter.size());
    torch::Tensor inter_aligned;
    if (ablation_.use_distillation) {
      const Pyramid pyr_d = distill_E->encode(in.windows.flatten(0, 1));
      for (int i = 0; i < 3; ++i) {
        r.distill_event.push_back(pick(pyr_d, n, n_win, {in.keyframe_windows[i]}));
        r.distill_image.push_back(frozen_targets ? (*frozen_targets)[i]
                                                 : detach(pick(pyr_lin, n, 3, {i})));
      }
      inter_aligned = distill_E->align(pick(pyr_d, n, n_win, inter),
                                       repeat_slot(pyr_d, n, n_win, in.keyframe_windows[1], n_inter))[0];
    } else {
      const auto idx = torch::tensor(inter, torch::kLong);
      const Pyramid pyr_w = encoder_E(in.windows.index_select(1, idx).flatten(0, 1));
      inter_aligned = pcd_E(pyr_w, repeat_slot(pyr_ev, n, 3, 1, n_inter))[0];
    }
    inter_aligned = inter_aligned.view({n, n_inter, c, h, w});
    for (int64_t j = 0; j < n_inter; ++j) {
      r.branches.emplace_back("window_" + std::to_string(inter[j]), inter_aligned.select(1, j));
    }
  }

  std::vector<torch::Tensor> feats;
  feats.reserve(r.branches.size());
  for (const auto& b : r.branches) feats.push_back(b.second);
  r.hdr = fusion(torch::cat(feats, 1), f_lin_ref);
  return r;
}

}  // namespace evhdr::net
