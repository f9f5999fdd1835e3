#pragma once

#include <string>
#include <vector>

#include "statconsist/tensor.hpp"

namespace statconsist {

enum class Provenance { real, fake, adversarial };

std::string to_string(Provenance p);

// Class convention used everywhere: 0 = real, 1 = fake.
inline constexpr int kRealLabel = 0;
inline constexpr int kFakeLabel = 1;

/// H x W x C tensor with values in [0, 1].
struct Image {
    Tensor pixels;
    Provenance label = Provenance::real;

    Image() = default;
    Image(Tensor px, Provenance p);

    std::size_t height() const { return pixels.dim(0); }
    std::size_t width() const { return pixels.dim(1); }
    std::size_t channels() const { return pixels.dim(2); }
};

// [N,H,W,C] batch from equally-shaped images.
Tensor stack(const std::vector<Image>& images);
std::vector<Image> unstack(const Tensor& batch, Provenance label);

// Per-pixel channel mean, [H,W].
Tensor luminance(const Image& img);

// Rounds to the nearest 1/255 step (ties to even), as a PNG round trip would.
Image quantize8(const Image& img);

}  // namespace statconsist
