#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "statconsist/statx.hpp"
#include "statconsist/synth.hpp"
#include "support.hpp"

using namespace statconsist;

namespace {

Image rotate90(const Image& img) {
    std::size_t n = img.height(), c = img.channels();
    Tensor out({n, n, c});
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t k = 0; k < c; ++k) out.at({x, n - 1 - y, k}) = img.pixels.at({y, x, k});
    return Image(out, img.label);
}

// Uniform noise shared across channels, clamped to [0,1].
Image with_noise(const Image& img, double amp, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-amp, amp);
    Image out = img;
    for (std::size_t y = 0; y < img.height(); ++y)
        for (std::size_t x = 0; x < img.width(); ++x) {
            double n = u(rng);
            for (std::size_t k = 0; k < img.channels(); ++k) {
                double& v = out.pixels.at({y, x, k});
                v = std::clamp(v + n, 0.0, 1.0);
            }
        }
    return out;
}

}  // namespace

TEST_CASE("brightness histogram examples") {
    auto h = brightness_histogram({testing::constant_image(8, 8, 3, 0.5)});
    REQUIRE(h.size() == kHistogramBins);
    CHECK(h[128] == 1.0);
    CHECK(std::accumulate(h.begin(), h.end(), 0.0) == doctest::Approx(1.0));

    std::mt19937_64 rng(1);
    std::vector<Image> imgs;
    for (int i = 0; i < 5; ++i) imgs.push_back(testing::random_image(rng, 9, 7, 3));
    auto g = brightness_histogram(imgs);
    CHECK(std::abs(std::accumulate(g.begin(), g.end(), 0.0) - 1.0) < 1e-9);
    CHECK_THROWS(brightness_histogram({}));
}

TEST_CASE("fakes have almost no brightness tail") {
    CorpusSpec s;
    std::vector<Image> reals, fakes;
    for (std::size_t i = 0; i < 50; ++i) {
        reals.push_back(gen_real(s, i));
        fakes.push_back(gen_fake(s, i));
    }
    CHECK(exposure_tail_mass(fakes) < 0.1 * exposure_tail_mass(reals));
    CHECK(spectral_peak_report(reals).empty());
}

TEST_CASE("a horizontal sinusoid peaks at its own radius") {
    const std::size_t n = 32;
    for (std::size_t k : {3u, 5u, 8u}) {
        Tensor px({n, n, 3});
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x)
                for (std::size_t c = 0; c < 3; ++c)
                    px.at({y, x, c}) = 0.5 + 0.4 * std::sin(2 * std::numbers::pi * k * x / n);
        auto p = radial_power_spectrum({Image(px, Provenance::real)});
        REQUIRE(p.frequency.size() == n / 2);
        std::size_t best = 1;
        for (std::size_t i = 1; i < p.frequency.size(); ++i)
            if (p.mean_log_power[i] > p.mean_log_power[best]) best = i;
        CHECK(p.frequency[best] == doctest::Approx(static_cast<double>(k) / n));
        CHECK(std::adjacent_find(p.frequency.begin(), p.frequency.end(), std::greater_equal<>()) ==
              p.frequency.end());
    }
    CHECK_THROWS(radial_power_spectrum({testing::constant_image(8, 6, 3, 0.5)}));
}

TEST_CASE("white noise has a flat profile") {
    std::mt19937_64 rng(2);
    std::vector<Image> imgs;
    for (int i = 0; i < 100; ++i) imgs.push_back(testing::random_image(rng, 32, 32, 3));
    auto p = radial_power_spectrum(imgs);
    auto [lo, hi] = std::minmax_element(p.mean_log_power.begin() + 1, p.mean_log_power.end());
    CHECK(std::exp(*hi - *lo) < 3.0);
    CHECK(p.image_count == 100);
}

TEST_CASE("spectra are rotation and permutation invariant") {
    std::mt19937_64 rng(3);
    std::vector<Image> imgs;
    for (int i = 0; i < 4; ++i) imgs.push_back(gen_real(testing::small_corpus(4, 32, 2), i));
    for (const auto& img : imgs) {
        auto a = radial_power_spectrum({img});
        auto b = radial_power_spectrum({rotate90(img)});
        for (std::size_t i = 0; i < a.mean_log_power.size(); ++i)
            CHECK(std::abs(a.mean_log_power[i] - b.mean_log_power[i]) < 1e-9);
    }
    auto shuffled = imgs;
    std::reverse(shuffled.begin(), shuffled.end());
    std::swap(shuffled[0], shuffled[2]);
    auto pa = radial_power_spectrum(imgs), pb = radial_power_spectrum(shuffled);
    for (std::size_t i = 0; i < pa.mean_log_power.size(); ++i)
        CHECK(std::abs(pa.mean_log_power[i] - pb.mean_log_power[i]) < 1e-12);
    auto ha = brightness_histogram(imgs), hb = brightness_histogram(shuffled);
    for (std::size_t i = 0; i < ha.size(); ++i) CHECK(std::abs(ha[i] - hb[i]) < 1e-15);
}

TEST_CASE("blurring fakes closes most of the high-frequency gap") {
    CorpusSpec s;
    std::vector<Image> reals, fakes, blurred;
    for (std::size_t i = 0; i < 40; ++i) {
        reals.push_back(gen_real(s, i));
        fakes.push_back(gen_fake(s, i));
    }
    // Plain separable gaussian, sigma 2, radius 6, reflected borders.
    const int r = 6;
    std::vector<double> g(2 * r + 1);
    double z = 0;
    for (int i = -r; i <= r; ++i) z += g[i + r] = std::exp(-i * i / 8.0);
    for (double& v : g) v /= z;
    auto refl = [](int i, int n) { return i < 0 ? -i : (i >= n ? 2 * (n - 1) - i : i); };
    for (const auto& f : fakes) {
        int n = static_cast<int>(f.height());
        Tensor tmp = f.pixels, out = f.pixels;
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                for (std::size_t c = 0; c < 3; ++c) {
                    double acc = 0;
                    for (int k = -r; k <= r; ++k) acc += g[k + r] * f.pixels.at({std::size_t(y), std::size_t(refl(x + k, n)), c});
                    tmp.at({std::size_t(y), std::size_t(x), c}) = acc;
                }
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                for (std::size_t c = 0; c < 3; ++c) {
                    double acc = 0;
                    for (int k = -r; k <= r; ++k) acc += g[k + r] * tmp.at({std::size_t(refl(y + k, n)), std::size_t(x), c});
                    out.at({std::size_t(y), std::size_t(x), c}) = acc;
                }
        blurred.emplace_back(out, Provenance::fake);
    }
    double hr = high_frequency_log_power(radial_power_spectrum(reals));
    double hf = high_frequency_log_power(radial_power_spectrum(fakes));
    double hb = high_frequency_log_power(radial_power_spectrum(blurred));
    REQUIRE(hf > hr);
    CHECK(hf - hb >= 0.5 * (hf - hr));
}

TEST_CASE("strong uniform noise suppresses the checkerboard peaks") {
    CorpusSpec s;
    std::vector<Image> fakes;
    for (std::size_t i = 0; i < 50; ++i) fakes.push_back(gen_fake(s, i));
    REQUIRE(!spectral_peak_report(fakes).empty());
    std::mt19937_64 rng(4);
    std::vector<Image> noisy;
    double amp = 6.0 * s.fake_artifacts.checker_amp;
    for (const auto& f : fakes) noisy.push_back(with_noise(f, amp, rng));
    CHECK(spectral_peak_report(noisy).empty());
}

TEST_CASE("quality proxies examples") {
    Image a = testing::constant_image(64, 64, 3, 0.3);
    auto q = quality_proxies(a, a);
    CHECK(q.linf == 0.0);
    CHECK(q.l2 == 0.0);
    CHECK(q.spectral_dist == 0.0);

    Image b = a;
    b.pixels.at({10, 20, 1}) += 0.5;
    auto d = quality_proxies(a, b);
    CHECK(d.linf == doctest::Approx(0.5));
    CHECK(d.l2 == doctest::Approx(0.5 / std::sqrt(64.0 * 64.0 * 3.0)));
    CHECK(d.spectral_dist > 0.0);
    CHECK_THROWS(quality_proxies(a, testing::constant_image(32, 32, 3, 0.3)));

    auto m = mean_quality({a, a}, {a, b});
    CHECK(m.linf == doctest::Approx(0.25));
}
