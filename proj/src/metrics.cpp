#include "evhdr/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace evhdr {

double tonemap(double h, double mu) {
  if (!(h >= 0.0)) throw InvalidInput("tonemap: input must be >= 0");
  return std::log1p(mu * h) / std::log1p(mu);
}

double inverse_tonemap(double v, double mu) {
  return std::expm1(v * std::log1p(mu)) / mu;
}

Image tonemap(const Image& img, double mu) {
  Image out(img.height, img.width, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    out.data[i] = static_cast<float>(tonemap(img.data[i], mu));
  }
  return out;
}

double psnr_from_mse(double mse, double peak) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double psnr(const Image& pred, const Image& gt, PsnrDomain domain) {
  if (!pred.same_shape(gt)) throw InvalidInput("psnr: shape mismatch");
  if (gt.empty()) throw InvalidInput("psnr: empty image");
  double peak = *std::max_element(gt.data.begin(), gt.data.end());
  if (!(peak > 0.0)) peak = 1.0;
  double se = 0.0;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    double p = std::max(0.0, static_cast<double>(pred.data[i])) / peak;
    double g = std::max(0.0, static_cast<double>(gt.data[i])) / peak;
    if (domain == PsnrDomain::Mu) {
      p = tonemap(p);
      g = tonemap(g);
    }
    se += (p - g) * (p - g);
  }
  return psnr_from_mse(se / static_cast<double>(gt.data.size()));
}

void MetricReport::add(MetricRow row) {
  rows.push_back(std::move(row));
  double sl = 0.0;
  double sm = 0.0;
  for (const auto& r : rows) {
    sl += r.psnr_l;
    sm += r.psnr_mu;
  }
  mean_psnr_l = sl / static_cast<double>(rows.size());
  mean_psnr_mu = sm / static_cast<double>(rows.size());
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["label"] = label;
  j["mean_psnr_l"] = mean_psnr_l;
  j["mean_psnr_mu"] = mean_psnr_mu;
  j["samples"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["samples"].push_back(
        {{"id", r.sample_id}, {"psnr_l", r.psnr_l}, {"psnr_mu", r.psnr_mu}});
  }
  return j.dump(2);
}

MetricReport MetricReport::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MetricReport r;
  r.label = j.value("label", "");
  for (const auto& s : j.at("samples")) {
    r.rows.push_back({s.at("id").get<std::string>(), s.at("psnr_l").get<double>(),
                      s.at("psnr_mu").get<double>()});
  }
  r.mean_psnr_l = j.at("mean_psnr_l").get<double>();
  r.mean_psnr_mu = j.at("mean_psnr_mu").get<double>();
  return r;
}

}  // namespace evhdr
