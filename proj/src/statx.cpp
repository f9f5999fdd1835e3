#include "statconsist/statx.hpp"

#include <algorithm>
#include <cmath>

#include "statconsist/transforms.hpp"

namespace statconsist {

namespace {

void require_nonempty(const std::vector<Image>& images, const char* what) {
    if (images.empty()) throw std::invalid_argument(std::string(what) + " needs at least one image");
}

constexpr double kLogFloorPower = 1e-20;

}  // namespace

std::vector<double> brightness_histogram(const std::vector<Image>& images) {
    require_nonempty(images, "brightness_histogram");
    std::vector<double> hist(kHistogramBins, 0.0);
    for (const auto& img : images) {
        Tensor l = luminance(img);
        double inv = 1.0 / static_cast<double>(l.size() * images.size());
        for (double v : l.data()) {
            auto b = static_cast<std::size_t>(std::floor(v * kHistogramBins));
            hist[std::min(b, kHistogramBins - 1)] += inv;
        }
    }
    return hist;
}

double exposure_tail_mass(const std::vector<Image>& images, double lo, double hi) {
    require_nonempty(images, "exposure_tail_mass");
    std::size_t hits = 0, total = 0;
    for (const auto& img : images) {
        Tensor l = luminance(img);
        for (double v : l.data()) hits += (v <= lo || v >= hi);
        total += l.size();
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

SpectrumProfile radial_power_spectrum(const std::vector<Image>& images) {
    require_nonempty(images, "radial_power_spectrum");
    std::size_t n = images.front().height();
    std::size_t bins = n / 2;
    SpectrumProfile p;
    p.mean_log_power.assign(bins, 0.0);
    for (std::size_t b = 0; b < bins; ++b) p.frequency.push_back(static_cast<double>(b) / static_cast<double>(n));
    for (const auto& img : images) {
        if (img.height() != img.width()) throw ShapeError("radial_power_spectrum needs square images");
        if (img.height() != n) throw ShapeError("radial_power_spectrum needs equally sized images");
        ComplexField f = dft2(to_complex(luminance(img)));
        std::vector<double> power(bins, 0.0);
        std::vector<std::size_t> count(bins, 0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double r = std::hypot(dft_frequency(i, n), dft_frequency(j, n)) * static_cast<double>(n);
                auto b = static_cast<std::size_t>(std::lround(r));
                if (b >= bins) continue;
                power[b] += std::norm(f.at(i, j));
                ++count[b];
            }
        }
        for (std::size_t b = 0; b < bins; ++b) {
            p.mean_log_power[b] += std::log(power[b] / static_cast<double>(count[b]) + kLogFloorPower);
        }
    }
    for (double& v : p.mean_log_power) v /= static_cast<double>(images.size());
    p.image_count = images.size();
    return p;
}

double high_frequency_log_power(const SpectrumProfile& p) {
    std::size_t bins = p.mean_log_power.size();
    std::size_t start = std::max<std::size_t>(1, bins - bins / 4);
    double s = 0.0;
    for (std::size_t b = start; b < bins; ++b) s += p.mean_log_power[b];
    return s / static_cast<double>(bins - start);
}

Tensor mean_log_magnitude(const std::vector<Image>& images) {
    require_nonempty(images, "mean_log_magnitude");
    std::size_t h = images.front().height(), w = images.front().width();
    Tensor acc({h, w});
    for (const auto& img : images) {
        if (img.height() != h || img.width() != w) throw ShapeError("images must share a shape");
        Tensor m = dft_magnitude(luminance(img));
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += std::log(m[k] + 1e-12);
    }
    for (double& v : acc.data()) v /= static_cast<double>(images.size());
    return acc;
}

std::vector<SpectralPeak> spectral_peak_report(const std::vector<Image>& images, const PeakOptions& opt) {
    Tensor lm = mean_log_magnitude(images);
    long h = static_cast<long>(lm.dim(0)), w = static_cast<long>(lm.dim(1));
    long cy = h / 2, cx = w / 2;
    long win = static_cast<long>(opt.window);
    double log_thr = std::log(opt.threshold);
    auto at = [&](long y, long x) { return lm[static_cast<std::size_t>(((y % h + h) % h) * w + (x % w + w) % w)]; };
    std::vector<SpectralPeak> peaks;
    std::vector<double> neigh;
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            if (std::hypot(static_cast<double>(y - cy), static_cast<double>(x - cx)) <= opt.dc_exclusion) continue;
            double v = at(y, x);
            bool is_max = true;
            for (long dy = -1; dy <= 1 && is_max; ++dy) {
                for (long dx = -1; dx <= 1; ++dx) {
                    if ((dy || dx) && at(y + dy, x + dx) > v) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (!is_max) continue;
            neigh.clear();
            for (long dy = -win; dy <= win; ++dy) {
                for (long dx = -win; dx <= win; ++dx) {
                    if (dy || dx) neigh.push_back(at(y + dy, x + dx));
                }
            }
            std::nth_element(neigh.begin(), neigh.begin() + neigh.size() / 2, neigh.end());
            double med = neigh[neigh.size() / 2];
            if (v - med >= log_thr) {
                peaks.push_back({static_cast<double>(y - cy) / static_cast<double>(h),
                                 static_cast<double>(x - cx) / static_cast<double>(w), std::exp(v - med)});
            }
        }
    }
    return peaks;
}

QualityProxies quality_proxies(const Image& original, const Image& adversarial) {
    if (original.pixels.shape() != adversarial.pixels.shape()) throw ShapeError("quality_proxies shape mismatch");
    QualityProxies q;
    double ss = 0.0;
    for (std::size_t i = 0; i < original.pixels.size(); ++i) {
        double d = adversarial.pixels[i] - original.pixels[i];
        q.linf = std::max(q.linf, std::abs(d));
        ss += d * d;
    }
    q.l2 = std::sqrt(ss / static_cast<double>(original.pixels.size()));
    if (original.height() == original.width()) {
        auto a = radial_power_spectrum({original});
        auto b = radial_power_spectrum({adversarial});
        double sd = 0.0;
        for (std::size_t k = 0; k < a.mean_log_power.size(); ++k) {
            sd += std::pow(a.mean_log_power[k] - b.mean_log_power[k], 2);
        }
        q.spectral_dist = std::sqrt(sd);
    }
    return q;
}

QualityProxies mean_quality(const std::vector<Image>& originals, const std::vector<Image>& adversarial) {
    if (originals.size() != adversarial.size() || originals.empty()) {
        throw std::invalid_argument("mean_quality needs aligned non-empty lists");
    }
    QualityProxies m;
    for (std::size_t i = 0; i < originals.size(); ++i) {
        auto q = quality_proxies(originals[i], adversarial[i]);
        m.linf += q.linf;
        m.l2 += q.l2;
        m.spectral_dist += q.spectral_dist;
    }
    double n = static_cast<double>(originals.size());
    m.linf /= n;
    m.l2 /= n;
    m.spectral_dist /= n;
    return m;
}

}  // namespace statconsist
