#pragma once

#include <filesystem>

#include "statconsist/image.hpp"

namespace statconsist {

// Reads an 8-bit PNG as RGB with values v/255. Files with 16-bit samples are
// rejected rather than silently down-converted.
Image png_read(const std::filesystem::path& path, Provenance label = Provenance::real);

// Writes 8-bit RGB; each value is scaled by 255 and rounded half-to-even.
// Images with one channel are replicated to RGB.
void png_write(const std::filesystem::path& path, const Image& img);

}  // namespace statconsist
