#include "statconsist/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "statconsist/png_io.hpp"

namespace statconsist {

namespace {

constexpr std::array<std::array<double, 3>, 6> kPalette{{
    {0.12, 0.47, 0.71},
    {0.84, 0.15, 0.16},
    {0.17, 0.63, 0.17},
    {1.00, 0.50, 0.05},
    {0.58, 0.40, 0.74},
    {0.55, 0.34, 0.29},
}};

struct Canvas {
    std::size_t w, h;
    Tensor px;

    Canvas(std::size_t w_, std::size_t h_) : w(w_), h(h_), px({h_, w_, 3}, 1.0) {}

    void set(long x, long y, const std::array<double, 3>& c) {
        if (x < 0 || y < 0 || x >= static_cast<long>(w) || y >= static_cast<long>(h)) return;
        for (std::size_t k = 0; k < 3; ++k) px[(static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)) * 3 + k] = c[k];
    }

    void line(long x0, long y0, long x1, long y1, const std::array<double, 3>& c) {
        long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        long err = dx + dy;
        for (;;) {
            set(x0, y0, c);
            set(x0, y0 + 1, c);
            if (x0 == x1 && y0 == y1) break;
            long e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    }
};

}  // namespace

void line_plot(const std::filesystem::path& path, const std::vector<Series>& series, std::size_t width,
               std::size_t height) {
    if (width < 64 || height < 64) throw std::invalid_argument("plot must be at least 64x64");
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw std::invalid_argument("series '" + s.label + "' has mismatched x/y");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (!(xmax >= xmin)) xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;
    double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;

    Canvas cv(width, height);
    const long margin = 24;
    long left = margin, right = static_cast<long>(width) - margin;
    long top = margin, bottom = static_cast<long>(height) - margin;
    const std::array<double, 3> axis{0.2, 0.2, 0.2}, grid{0.88, 0.88, 0.88};
    for (int g = 1; g < 4; ++g) {
        long gy = top + (bottom - top) * g / 4;
        long gx = left + (right - left) * g / 4;
        cv.line(left, gy, right, gy, grid);
        cv.line(gx, top, gx, bottom, grid);
    }
    cv.line(left, bottom, right, bottom, axis);
    cv.line(left, top, left, bottom, axis);

    auto sx = [&](double x) { return left + std::lround((x - xmin) / (xmax - xmin) * static_cast<double>(right - left)); };
    auto sy = [&](double y) { return bottom - std::lround((y - ymin) / (ymax - ymin) * static_cast<double>(bottom - top)); };
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const auto& c = kPalette[k % kPalette.size()];
        for (std::size_t i = 0; i + 1 < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i]) || !std::isfinite(s.y[i + 1])) continue;
            cv.line(sx(s.x[i]), sy(s.y[i]), sx(s.x[i + 1]), sy(s.y[i + 1]), c);
        }
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            long px = sx(s.x[i]), py = sy(s.y[i]);
            for (long d = -2; d <= 2; ++d) {
                cv.set(px + d, py, c);
                cv.set(px, py + d, c);
            }
        }
    }
    png_write(path, Image(std::move(cv.px), Provenance::real));
}

}  // namespace statconsist
