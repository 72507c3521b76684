#pragma once

#include <torch/torch.h>

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "evhdr/sample.hpp"

namespace evhdr::net {

/// Three feature levels at full, half and quarter resolution.
using Pyramid = std::array<torch::Tensor, 3>;

struct NetworkConfig {
  int channels = 64;
  int image_channels = 3;
  int bins = 5;
  int offset_groups = 8;
  int windows = 11;  // sliding windows per sample (3 keyframes + intermediates)
  double leaky_slope = 0.1;

  int intermediate_windows() const { return windows - 3; }
  void validate() const;
  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Which event branches feed the fusion network. The four admissible
/// settings are the rows of the ablation table.
struct AblationConfig {
  bool use_event_alignment = true;
  bool use_event_subsampling = true;
  bool use_distillation = true;

  void validate() const;
  std::string label() const;
  static AblationConfig images_only() { return {false, false, false}; }
  static AblationConfig event_alignment() { return {true, false, false}; }
  static AblationConfig event_subsampling() { return {true, true, false}; }
  static AblationConfig full() { return {true, true, true}; }
  static std::array<AblationConfig, 4> table_rows() {
    return {images_only(), event_alignment(), event_subsampling(), full()};
  }
  friend bool operator==(const AblationConfig&, const AblationConfig&) = default;
};

/// Batched network inputs, NCHW with an extra slot axis after N.
struct NetworkInput {
  torch::Tensor ldr;              // (N, 3, 3, H, W) in [0, 1]
  torch::Tensor linear;           // (N, 3, 3, H, W)
  torch::Tensor keyframe_events;  // (N, 3, B, H, W), normalized voxels
  torch::Tensor windows;          // (N, n_windows, B, H, W)
  std::vector<int> keyframe_windows;

  int64_t batch() const { return ldr.size(0); }
  int64_t height() const { return ldr.size(3); }
  int64_t width() const { return ldr.size(4); }
  NetworkInput to(torch::Dtype dtype) const;
};

NetworkInput make_input(const std::vector<const BracketSample*>& samples);
NetworkInput make_input(const BracketSample& sample);
torch::Tensor image_to_tensor(const Image& img);  // (C, H, W)
Image tensor_to_image(const torch::Tensor& chw);

/// Deformable convolution (no modulation). `offsets` has 2*G*9 channels laid
/// out as (group, tap, [dy, dx]) in pixels; taps are row-major over the 3x3
/// kernel. Bilinear sampling with zeros outside the image.
torch::Tensor deform_conv2d(const torch::Tensor& input,
                            const torch::Tensor& offsets,
                            const torch::Tensor& weight,
                            const torch::Tensor& bias, int offset_groups,
                            int dilation = 1);

class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// 1x1 conv + residual block at full resolution, then two
/// (stride-2 conv, 3x3 conv) stages for the half and quarter levels.
class PyramidEncoderImpl : public torch::nn::Module {
 public:
  PyramidEncoderImpl(int in_channels, int channels, double slope);
  Pyramid forward(const torch::Tensor& x);
  int in_channels() const { return in_channels_; }

 private:
  int in_channels_;
  double slope_;
  torch::nn::Conv2d head_{nullptr};
  ResidualBlock res_{nullptr};
  torch::nn::Conv2d down1_{nullptr}, conv1_{nullptr}, down2_{nullptr}, conv2_{nullptr};
};
TORCH_MODULE(PyramidEncoder);

/// Spatial attention: m = sigmoid(conv(lrelu(conv([f_i, f_ref])))).
class LdrAttentionImpl : public torch::nn::Module {
 public:
  LdrAttentionImpl(int channels, double slope);
  torch::Tensor attention_map(const torch::Tensor& f_i, const torch::Tensor& f_ref);
  torch::Tensor forward(const torch::Tensor& f_i, const torch::Tensor& f_ref);

  torch::nn::Conv2d conv_a{nullptr}, conv_b{nullptr};

 private:
  double slope_;
};
TORCH_MODULE(LdrAttention);

class DeformConv2dImpl : public torch::nn::Module {
 public:
  DeformConv2dImpl(int in_channels, int out_channels, int offset_groups);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& offsets);
  int offset_channels() const { return 2 * groups_ * 9; }

  torch::Tensor weight, bias;

 private:
  int groups_;
};
TORCH_MODULE(DeformConv2d);

/// Pyramidal cascading deformable alignment of `src` to `ref`, coarse to
/// fine. Offsets of a coarser level are upsampled x2 and doubled.
class PcdAlignImpl : public torch::nn::Module {
 public:
  PcdAlignImpl(int channels, int offset_groups, double slope);
  Pyramid forward(const Pyramid& src, const Pyramid& ref);
  /// Offsets used at each level by the last forward call.
  const Pyramid& last_offsets() const { return last_offsets_; }

 private:
  double slope_;
  std::array<torch::nn::Conv2d, 3> offset_a_{nullptr, nullptr, nullptr};
  std::array<torch::nn::Conv2d, 2> offset_b_{nullptr, nullptr};
  std::array<torch::nn::Conv2d, 3> offset_out_{nullptr, nullptr, nullptr};
  std::array<DeformConv2d, 3> dcn_{nullptr, nullptr, nullptr};
  std::array<torch::nn::Conv2d, 2> merge_{nullptr, nullptr};
  Pyramid last_offsets_;
};
TORCH_MODULE(PcdAlign);

/// Dilated conv (dilation 2) -> 1x1 conv -> local residual.
class DrdbImpl : public torch::nn::Module {
 public:
  DrdbImpl(int channels, double slope);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  double slope_;
  torch::nn::Conv2d dilated_{nullptr}, pointwise_{nullptr};
};
TORCH_MODULE(Drdb);

class FusionNetImpl : public torch::nn::Module {
 public:
  FusionNetImpl(int branches, int channels, int out_channels, double slope);
  torch::Tensor forward(const torch::Tensor& stacked, const torch::Tensor& f_ref);
  int input_channels() const { return in_channels_; }

 private:
  int in_channels_;
  double slope_;
  torch::nn::Conv2d fuse_in_{nullptr};
  std::array<Drdb, 3> blocks_{nullptr, nullptr, nullptr};
  torch::nn::Conv2d tail_a_{nullptr}, tail_b_{nullptr};
};
TORCH_MODULE(FusionNet);

/// Event-to-image translation: its own encoder plus its own alignment.
class DistillBranchImpl : public torch::nn::Module {
 public:
  DistillBranchImpl(int bins, int channels, int offset_groups, double slope);
  Pyramid encode(const torch::Tensor& windows) { return encoder->forward(windows); }
  Pyramid align(const Pyramid& src, const Pyramid& ref) { return aligner->forward(src, ref); }

  PyramidEncoder encoder{nullptr};
  PcdAlign aligner{nullptr};
};
TORCH_MODULE(DistillBranch);

struct ForwardResult {
  torch::Tensor hdr;                   // (N, 3, H, W), >= 0
  std::vector<Pyramid> distill_event;  // per keyframe, distillation branch
  std::vector<Pyramid> distill_image;  // per keyframe, detached linear features
  std::vector<std::pair<std::string, torch::Tensor>> branches;  // fusion inputs
};

class HdrNetImpl : public torch::nn::Module {
 public:
  HdrNetImpl(NetworkConfig cfg, AblationConfig ablation);

  /// `frozen_targets`, when given, replaces the stop-gradient targets of the
  /// distillation loss (used to differentiate the loss numerically).
  ForwardResult forward(const NetworkInput& input,
                        const std::vector<Pyramid>* frozen_targets = nullptr);

  const NetworkConfig& config() const { return cfg_; }
  const AblationConfig& ablation() const { return ablation_; }
  int fusion_branches() const;
  int64_t parameter_count() const;
  /// Parameters keyed by group (encoder_I, attention, encoder_L, pcd_L,
  /// encoder_E, pcd_E, distill_E, fusion).
  std::map<std::string, std::vector<torch::Tensor>> parameter_groups() const;

  torch::nn::Conv2d encoder_I{nullptr};
  LdrAttention attention{nullptr};
  PyramidEncoder encoder_L{nullptr};
  PcdAlign pcd_L{nullptr};
  PyramidEncoder encoder_E{nullptr};
  PcdAlign pcd_E{nullptr};
  DistillBranch distill_E{nullptr};
  FusionNet fusion{nullptr};

 private:
  void check_input(const NetworkInput& input) const;
  NetworkConfig cfg_;
  AblationConfig ablation_;
};
TORCH_MODULE(HdrNet);

inline const std::array<const char*, 8> kParameterGroups = {
    "encoder_I", "attention", "encoder_L", "pcd_L",
    "encoder_E", "pcd_E",     "distill_E", "fusion"};

}  // namespace evhdr::net
