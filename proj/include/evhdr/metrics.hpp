#pragma once

#include <string>
#include <vector>

#include "evhdr/image.hpp"

namespace evhdr {

inline constexpr double kMu = 5000.0;
inline constexpr double kPsnrCap = 99.0;

/// mu-law compression log(1 + mu h) / log(1 + mu). Throws on h < 0.
double tonemap(double h, double mu = kMu);
double inverse_tonemap(double v, double mu = kMu);
Image tonemap(const Image& img, double mu = kMu);

enum class PsnrDomain { Linear, Mu };

/// PSNR with both images divided by max(gt) (peak 1). Identical inputs give
/// the 99 dB cap.
double psnr(const Image& pred, const Image& gt, PsnrDomain domain);
double psnr_from_mse(double mse, double peak = 1.0);

struct LossReport {
  double l_hdr = 0.0;
  double l_distill = 0.0;
  double l_total = 0.0;
};

struct MetricRow {
  std::string sample_id;
  double psnr_l = 0.0;
  double psnr_mu = 0.0;
};

struct MetricReport {
  std::string label;
  std::vector<MetricRow> rows;
  double mean_psnr_l = 0.0;
  double mean_psnr_mu = 0.0;

  void add(MetricRow row);
  std::string to_json() const;
  static MetricReport from_json(const std::string& text);
};

}  // namespace evhdr
