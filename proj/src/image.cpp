#include "statconsist/image.hpp"

#include <algorithm>
#include <cmath>

namespace statconsist {

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::real: return "real";
        case Provenance::fake: return "fake";
        case Provenance::adversarial: return "adversarial";
    }
    return "unknown";
}

Image::Image(Tensor px, Provenance p) : pixels(std::move(px)), label(p) {
    if (pixels.rank() != 3) throw ShapeError("image must be [H,W,C], got " + shape_str(pixels.shape()));
    // Round-off from convex combinations may overshoot by a few ulps.
    for (double& v : pixels.data()) {
        if (!(v >= -1e-9 && v <= 1.0 + 1e-9)) throw DomainError("image values must lie in [0,1]");
        v = std::clamp(v, 0.0, 1.0);
    }
}

Tensor stack(const std::vector<Image>& images) {
    if (images.empty()) throw std::invalid_argument("cannot stack an empty image list");
    const Shape& s = images.front().pixels.shape();
    Tensor out({images.size(), s[0], s[1], s[2]});
    std::size_t per = shape_size(s);
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i].pixels.shape() != s) throw ShapeError("images in a batch must share a shape");
        std::copy(images[i].pixels.data().begin(), images[i].pixels.data().end(), out.data().begin() + i * per);
    }
    return out;
}

std::vector<Image> unstack(const Tensor& batch, Provenance label) {
    if (batch.rank() != 4) throw ShapeError("unstack expects [N,H,W,C]");
    Shape s{batch.dim(1), batch.dim(2), batch.dim(3)};
    std::size_t per = shape_size(s);
    std::vector<Image> out;
    out.reserve(batch.dim(0));
    for (std::size_t i = 0; i < batch.dim(0); ++i) {
        std::vector<double> px(batch.data().begin() + i * per, batch.data().begin() + (i + 1) * per);
        out.emplace_back(Tensor(s, std::move(px)), label);
    }
    return out;
}

Tensor luminance(const Image& img) {
    std::size_t h = img.height(), w = img.width(), c = img.channels();
    Tensor l({h, w});
    for (std::size_t p = 0; p < h * w; ++p) {
        double s = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch) s += img.pixels[p * c + ch];
        l[p] = s / static_cast<double>(c);
    }
    return l;
}

Image quantize8(const Image& img) {
    Tensor q(img.pixels.shape());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = std::nearbyint(img.pixels[i] * 255.0) / 255.0;
    return Image(std::move(q), img.label);
}

}  // namespace statconsist
