#include "statconsist/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

namespace statconsist {

Image png_read(const std::filesystem::path& path, Provenance label) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw std::runtime_error("malformed PNG " + path.string() + ": " + img.message);
    }
    if (img.format & PNG_FORMAT_FLAG_LINEAR) {
        png_image_free(&img);
        throw std::runtime_error("unsupported PNG bit depth in " + path.string() + " (expected 8-bit)");
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        std::string msg = img.message;
        png_image_free(&img);
        throw std::runtime_error("malformed PNG " + path.string() + ": " + msg);
    }
    Tensor px({img.height, img.width, 3});
    for (std::size_t i = 0; i < buf.size(); ++i) px[i] = buf[i] / 255.0;
    return Image(std::move(px), label);
}

void png_write(const std::filesystem::path& path, const Image& img) {
    std::size_t h = img.height(), w = img.width(), c = img.channels();
    if (c != 1 && c != 3) throw ShapeError("png_write supports 1 or 3 channels");
    std::vector<std::uint8_t> buf(h * w * 3);
    for (std::size_t p = 0; p < h * w; ++p) {
        for (std::size_t ch = 0; ch < 3; ++ch) {
            double v = img.pixels[p * c + (c == 3 ? ch : 0)];
            if (!(v >= 0.0 && v <= 1.0)) throw DomainError("png_write expects values in [0,1]");
            buf[p * 3 + ch] = static_cast<std::uint8_t>(std::nearbyint(v * 255.0));
        }
    }
    png_image out;
    std::memset(&out, 0, sizeof out);
    out.version = PNG_IMAGE_VERSION;
    out.width = static_cast<png_uint_32>(w);
    out.height = static_cast<png_uint_32>(h);
    out.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&out, path.c_str(), 0, buf.data(), 0, nullptr)) {
        std::string msg = out.message;
        png_image_free(&out);
        throw std::runtime_error("failed to write PNG " + path.string() + ": " + msg);
    }
}

}  // namespace statconsist
