#pragma once

#include <vector>

#include "statconsist/image.hpp"

namespace statconsist {

inline constexpr std::size_t kHistogramBins = 256;

// Luminance histogram over [0,1], averaged over images, normalized to sum 1.
std::vector<double> brightness_histogram(const std::vector<Image>& images);

// Fraction of luminance values <= lo or >= hi, pooled over all images.
double exposure_tail_mass(const std::vector<Image>& images, double lo = 0.02, double hi = 0.98);

struct SpectrumProfile {
    std::vector<double> frequency;       // bin radius in cycles/sample, strictly increasing
    std::vector<double> mean_log_power;  // per bin, natural log, averaged over images
    std::size_t image_count = 0;
};

// Azimuthally averaged power spectrum of the luminance; size/2 integer-radius bins.
SpectrumProfile radial_power_spectrum(const std::vector<Image>& images);

// Mean log power over the top quarter of bins (DC is never part of it).
double high_frequency_log_power(const SpectrumProfile& p);

struct SpectralPeak {
    double fy;        // signed vertical frequency, cycles/sample
    double fx;        // signed horizontal frequency
    double strength;  // magnitude ratio to the local median
};

struct PeakOptions {
    double threshold = 10.0;
    std::size_t window = 3;     // half-width of the local-median window
    double dc_exclusion = 2.0;  // bins within this radius of DC are ignored
};

// Local maxima of the image-averaged log magnitude spectrum that exceed the
// local median by `threshold` (as a magnitude ratio).
std::vector<SpectralPeak> spectral_peak_report(const std::vector<Image>& images, const PeakOptions& opt = {});

// Image-averaged, fftshifted log magnitude spectrum of the luminance, [H,W].
Tensor mean_log_magnitude(const std::vector<Image>& images);

struct QualityProxies {
    double linf = 0.0;
    double l2 = 0.0;  // root-mean-square difference
    double spectral_dist = 0.0;
};

QualityProxies quality_proxies(const Image& original, const Image& adversarial);

// Mean of quality_proxies over aligned lists.
QualityProxies mean_quality(const std::vector<Image>& originals, const std::vector<Image>& adversarial);

}  // namespace statconsist
