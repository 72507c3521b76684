#include "evhdr/losses.hpp"

#include <cmath>

namespace evhdr::net {

torch::Tensor tonemap(const torch::Tensor& h, double mu) {
  if (h.numel() > 0 && h.min().item<double>() < 0.0) {
    throw InvalidInput("tonemap: input must be >= 0");
  }
  return torch::log1p(mu * h) / std::log1p(mu);
}

torch::Tensor hdr_loss(const torch::Tensor& pred, const torch::Tensor& gt, double mu) {
  if (!pred.sizes().equals(gt.sizes())) throw InvalidInput("hdr_loss: shape mismatch");
  return (tonemap(pred, mu) - tonemap(gt, mu)).abs().mean();
}

torch::Tensor distill_loss(const std::vector<Pyramid>& event_pyrs,
                           const std::vector<Pyramid>& image_pyrs) {
  if (event_pyrs.size() != image_pyrs.size() || event_pyrs.empty()) {
    throw InvalidInput("distill_loss: need matching, nonempty pyramid lists");
  }
  torch::Tensor loss;
  for (std::size_t i = 0; i < event_pyrs.size(); ++i) {
    for (int s = 0; s < 3; ++s) {
      const auto& fe = event_pyrs[i][s];
      const auto& fl = image_pyrs[i][s];
      if (!fe.sizes().equals(fl.sizes())) {
        throw InvalidInput("distill_loss: shape mismatch at scale " + std::to_string(s));
      }
      auto term = (fe - fl.detach()).square().mean();
      loss = loss.defined() ? loss + term : term;
    }
  }
  return loss;
}

LossReport LossTerms::report() const {
  return {l_hdr.item<double>(), l_distill.item<double>(), l_total.item<double>()};
}

LossTerms compute_losses(const ForwardResult& result, const torch::Tensor& gt, double mu) {
  LossTerms t;
  t.l_hdr = hdr_loss(result.hdr, gt, mu);
  t.l_distill = result.distill_event.empty()
                    ? torch::zeros({}, t.l_hdr.options())
                    : distill_loss(result.distill_event, result.distill_image);
  t.l_total = total_loss(t.l_hdr, t.l_distill);
  return t;
}

}  // namespace evhdr::net
