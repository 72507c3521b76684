#pragma once

#include <torch/torch.h>

#include <vector>

#include "evhdr/metrics.hpp"
#include "evhdr/network.hpp"

namespace evhdr::net {

/// mu-law tonemap of a nonnegative tensor. Throws InvalidInput on negatives.
torch::Tensor tonemap(const torch::Tensor& h, double mu = kMu);

/// Mean absolute difference of the tonemapped images.
torch::Tensor hdr_loss(const torch::Tensor& pred, const torch::Tensor& gt, double mu = kMu);

/// Sum over scales and keyframes of mean((f_event - sg(f_image))^2).
torch::Tensor distill_loss(const std::vector<Pyramid>& event_pyrs,
                           const std::vector<Pyramid>& image_pyrs);

inline torch::Tensor total_loss(const torch::Tensor& l_hdr, const torch::Tensor& l_distill) {
  return l_hdr + l_distill;
}

struct LossTerms {
  torch::Tensor l_hdr;
  torch::Tensor l_distill;
  torch::Tensor l_total;

  LossReport report() const;
};

/// Losses for one forward pass; the distillation term is zero when the
/// forward result carries no distillation pairs.
LossTerms compute_losses(const ForwardResult& result, const torch::Tensor& gt, double mu = kMu);

}  // namespace evhdr::net
