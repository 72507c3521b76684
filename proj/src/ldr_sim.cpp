#include "evhdr/ldr_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace evhdr {

void ExposureConfig::validate() const {
  if (!(exposure_times[0] > 0.0) || !(exposure_times[0] < exposure_times[1]) ||
      !(exposure_times[1] < exposure_times[2])) {
    throw InvalidInput("ExposureConfig: exposure times must be positive and ascending");
  }
  if (!(gain > 0.0)) throw InvalidInput("ExposureConfig: gain must be > 0");
  if (!(offset >= 0.0)) throw InvalidInput("ExposureConfig: offset must be >= 0");
  if (!(saturation > 0.0)) throw InvalidInput("ExposureConfig: saturation must be > 0");
  if (!(read_noise >= 0.0) || !(adc_noise >= 0.0)) {
    throw InvalidInput("ExposureConfig: noise levels must be >= 0");
  }
  if (bit_depth < 1 || bit_depth > 16) {
    throw InvalidInput("ExposureConfig: bit depth must be in [1, 16]");
  }
  if (!(gamma > 0.0)) throw InvalidInput("ExposureConfig: gamma must be > 0");
  if (!(full_well > 0.0)) throw InvalidInput("ExposureConfig: full_well must be > 0");
}

double noise_variance(double phi, double gain, double read_noise,
                      double adc_noise) {
  if (!(gain > 0.0)) throw InvalidInput("noise_variance: gain must be > 0");
  if (!(phi >= 0.0)) throw InvalidInput("noise_variance: phi must be >= 0");
  const double g2 = gain * gain;
  return phi / g2 + read_noise * read_noise / g2 + adc_noise * adc_noise;
}

LDRImage synthesize_ldr(const Image& hdr, double exposure_time,
                        const ExposureConfig& cfg, std::uint64_t seed) {
  if (!(exposure_time > 0.0)) {
    throw InvalidInput("synthesize_ldr: exposure time must be > 0");
  }
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double levels = std::ldexp(1.0, cfg.bit_depth) - 1.0;
  const bool noisy = cfg.photon_noise || cfg.read_noise > 0.0 || cfg.adc_noise > 0.0;

  LDRImage out;
  out.exposure_time = exposure_time;
  out.pixels = Image(hdr.height, hdr.width, hdr.channels);
  for (std::size_t i = 0; i < hdr.data.size(); ++i) {
    const double phi = hdr.data[i];
    if (!(phi >= 0.0)) throw InvalidInput("synthesize_ldr: radiance must be >= 0");
    double v = phi * exposure_time / cfg.gain + cfg.offset;
    if (noisy) {
      const double collected = cfg.photon_noise ? phi * exposure_time / cfg.full_well : 0.0;
      const double var =
          noise_variance(collected, cfg.gain, cfg.read_noise, cfg.adc_noise);
      // Always draw so the noise realization of a pixel does not depend on
      // the value of other pixels.
      v += std::sqrt(var) * normal(rng);
    }
    v = std::clamp(v, 0.0, cfg.saturation) / cfg.saturation;
    v = std::pow(v, 1.0 / cfg.gamma);
    out.pixels.data[i] = static_cast<float>(std::round(v * levels) / levels);
  }
  return out;
}

LinearImage linearize(const LDRImage& ldr, double gamma) {
  if (!(ldr.exposure_time > 0.0)) {
    throw InvalidInput("linearize: exposure time must be > 0");
  }
  LinearImage out;
  out.exposure_time = ldr.exposure_time;
  out.pixels = Image(ldr.pixels.height, ldr.pixels.width, ldr.pixels.channels);
  for (std::size_t i = 0; i < ldr.pixels.data.size(); ++i) {
    const double v = ldr.pixels.data[i];
    out.pixels.data[i] =
        static_cast<float>(std::pow(std::max(v, 0.0), gamma) / ldr.exposure_time);
  }
  return out;
}

double saturation_scale(std::span<const float> hdr, double exposure_time,
                        const ExposureConfig& cfg, double fraction) {
  if (hdr.empty()) throw InvalidInput("saturation_scale: no values");
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InvalidInput("saturation_scale: fraction must be in (0, 1)");
  }
  std::vector<float> values(hdr.begin(), hdr.end());
  const auto rank = static_cast<std::size_t>(
      std::floor((1.0 - fraction) * static_cast<double>(values.size() - 1)));
  std::nth_element(values.begin(), values.begin() + rank, values.end());
  const double q = values[rank];
  if (!(q > 0.0)) return 1.0;
  // phi * s * T / g + I0 = I_max at the quantile.
  return (cfg.saturation - cfg.offset) * cfg.gain / (q * exposure_time);
}

}  // namespace evhdr
