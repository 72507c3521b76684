#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "evhdr/image.hpp"

namespace evhdr {

/// Sensor and display parameters of the bracketing model. Exposure times are
/// in relative exposure units (medium exposure = 1 by default), so that
/// linearized images share the scale of the normalized ground truth.
struct ExposureConfig {
  std::array<double, 3> exposure_times{0.25, 1.0, 4.0};
  double gain = 1.0;
  double offset = 0.0;
  double saturation = 1.0;
  double read_noise = 0.01;
  double adc_noise = 0.005;
  bool photon_noise = true;
  double full_well = 1000.0;  // photo-electrons collected at saturation
  int bit_depth = 8;
  double gamma = 2.2;

  void validate() const;
  ExposureConfig noiseless() const {
    ExposureConfig c = *this;
    c.read_noise = 0.0;
    c.adc_noise = 0.0;
    c.photon_noise = false;
    return c;
  }
};

struct LDRImage {
  Image pixels;  // [0, 1], quantized
  double exposure_time = 0.0;
  bool is_reference = false;
};

struct LinearImage {
  Image pixels;  // >= 0
  double exposure_time = 0.0;
};

/// Var(n) = phi / g^2 + read^2 / g^2 + adc^2.
double noise_variance(double phi, double gain, double read_noise,
                      double adc_noise);

/// Measurement model I = min(phi T / g + I0 + n, I_max), then normalization,
/// display gamma 1/gamma and quantization to bit_depth levels. The photon
/// term of the noise variance uses the collected signal phi * T, expressed in
/// normalized units as phi * T / full_well.
LDRImage synthesize_ldr(const Image& hdr, double exposure_time,
                        const ExposureConfig& cfg, std::uint64_t seed);

/// I^gamma / T.
LinearImage linearize(const LDRImage& ldr, double gamma);

/// Scale that makes the given exposure saturate `fraction` of the pixel
/// values in `hdr` (nearest-rank quantile).
double saturation_scale(std::span<const float> hdr, double exposure_time,
                        const ExposureConfig& cfg, double fraction = 0.01);

}  // namespace evhdr
