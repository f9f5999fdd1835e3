#include "statconsist/degradations.hpp"

#include <algorithm>
#include <cmath>

namespace statconsist {

std::size_t exposure_coefficient_count(int degree) {
    if (degree < 0) throw std::invalid_argument("polynomial degree must be >= 0");
    auto d = static_cast<std::size_t>(degree);
    return (d + 1) * (d + 2) / 2;
}

std::size_t exposure_coefficient_index(int degree, int t, int l) {
    if (t < 0 || l < 0 || t + l > degree) throw std::out_of_range("coefficient (t,l) outside polynomial degree");
    // Rows t' < t contribute (D - t' + 1) entries each.
    std::size_t idx = 0;
    for (int tp = 0; tp < t; ++tp) idx += static_cast<std::size_t>(degree - tp + 1);
    return idx + static_cast<std::size_t>(l);
}

ExposureParams ExposureParams::identity(int degree, std::size_t grid) {
    ExposureParams p;
    p.degree = degree;
    p.a = Tensor({exposure_coefficient_count(degree)});
    if (grid < 2) throw std::invalid_argument("control grid needs at least 2 points per side");
    p.phi = Tensor({grid, grid, 2});
    return p;
}

void ExposureParams::clamp_offsets() {
    double lim = 0.5 * cell_width();
    for (double& v : phi.data()) v = std::clamp(v, -lim, lim);
}

void ExposureParams::validate() const {
    if (degree < 0) throw std::invalid_argument("polynomial degree must be >= 0");
    if (a.rank() != 1 || a.size() != exposure_coefficient_count(degree)) {
        throw ShapeError("exposure coefficients must have length (D+1)(D+2)/2");
    }
    if (phi.rank() != 3 || phi.dim(0) != phi.dim(1) || phi.dim(2) != 2) throw ShapeError("phi must be [G,G,2]");
    if (phi.dim(0) < 2) throw std::invalid_argument("control grid needs at least 2 points per side");
}

BlurParams BlurParams::identity(std::size_t height, std::size_t width, std::size_t kernel_size) {
    BlurParams p;
    p.sigma_map = Tensor({height, width}, kSigmaMin);
    p.kernel_size = kernel_size;
    p.validate();
    return p;
}

void BlurParams::clamp_sigma() {
    for (double& v : sigma_map.data()) v = std::clamp(v, kSigmaMin, kSigmaMax);
}

void BlurParams::validate() const {
    if (kernel_size < 3 || kernel_size % 2 == 0) throw std::invalid_argument("blur kernel size must be odd and >= 3");
    if (sigma_map.rank() != 2) throw ShapeError("sigma map must be [H,W]");
}

NoiseParams NoiseParams::identity(std::size_t height, std::size_t width, std::size_t channels, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    NoiseParams p;
    p.noise_map = Tensor({height, width, channels});
    p.epsilon = epsilon;
    return p;
}

void NoiseParams::project() {
    for (double& v : noise_map.data()) v = std::clamp(v, -epsilon, epsilon);
}

AttackParams AttackParams::identity(std::size_t height, std::size_t width, std::size_t channels, int degree,
                                    std::size_t grid, std::size_t kernel_size, double epsilon) {
    return {ExposureParams::identity(degree, grid), BlurParams::identity(height, width, kernel_size),
            NoiseParams::identity(height, width, channels, epsilon)};
}

namespace ad {

namespace {

struct Bilinear {
    std::size_t c00, c01, c10, c11;  // flat control-point indices (row-major in [G,G])
    double w00, w01, w10, w11;
};

Bilinear bilinear_at(double x, double y, std::size_t grid) {
    auto cell = [grid](double u, std::size_t& c, double& f) {
        double gu = u * static_cast<double>(grid - 1);
        auto ci = static_cast<std::size_t>(std::floor(gu));
        ci = std::min(ci, grid - 2);
        c = ci;
        f = gu - static_cast<double>(ci);
    };
    std::size_t cx, cy;
    double fx, fy;
    cell(x, cx, fx);
    cell(y, cy, fy);
    return {cy * grid + cx,
            cy * grid + cx + 1,
            (cy + 1) * grid + cx,
            (cy + 1) * grid + cx + 1,
            (1 - fx) * (1 - fy),
            fx * (1 - fy),
            (1 - fx) * fy,
            fx * fy};
}

double norm_coord(std::size_t i, std::size_t n) {
    return n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
}

long reflect101(long i, long n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

// Views a [H,W,C] or [N,H,W,C] image as batch/height/width/channels.
struct ImageDims {
    std::size_t n, h, w, c;
};

ImageDims image_dims(const Tensor& x) {
    if (x.rank() == 3) return {1, x.dim(0), x.dim(1), x.dim(2)};
    if (x.rank() == 4) return {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
    throw ShapeError("image tensor must be [H,W,C] or [N,H,W,C], got " + shape_str(x.shape()));
}

}  // namespace

Var exposure_field(const Var& a, const Var& phi, int degree, std::size_t height, std::size_t width) {
    if (degree < 0) throw std::invalid_argument("polynomial degree must be >= 0");
    if (height < 1 || width < 1) throw std::invalid_argument("exposure field needs H,W >= 1");
    const auto& av = a.value();
    const auto& pv = phi.value();
    if (av.rank() != 1 || av.size() != exposure_coefficient_count(degree)) {
        throw ShapeError("exposure coefficients must have length (D+1)(D+2)/2");
    }
    if (pv.rank() != 3 || pv.dim(0) != pv.dim(1) || pv.dim(2) != 2) throw ShapeError("phi must be [G,G,2]");
    std::size_t grid = pv.dim(0);
    if (grid < 2) throw std::invalid_argument("control grid needs at least 2 points per side");

    auto d = static_cast<std::size_t>(degree);
    Tensor field({height, width});
    // Cache warped coordinates so backward does not redo the interpolation.
    auto warped = std::make_shared<std::vector<double>>(2 * height * width);
    std::vector<double> px(d + 1), py(d + 1);
    for (std::size_t i = 0; i < height; ++i) {
        for (std::size_t j = 0; j < width; ++j) {
            double x = norm_coord(j, width), y = norm_coord(i, height);
            Bilinear b = bilinear_at(x, y, grid);
            double X = x + b.w00 * pv[2 * b.c00] + b.w01 * pv[2 * b.c01] + b.w10 * pv[2 * b.c10] + b.w11 * pv[2 * b.c11];
            double Y = y + b.w00 * pv[2 * b.c00 + 1] + b.w01 * pv[2 * b.c01 + 1] + b.w10 * pv[2 * b.c10 + 1] +
                       b.w11 * pv[2 * b.c11 + 1];
            (*warped)[2 * (i * width + j)] = X;
            (*warped)[2 * (i * width + j) + 1] = Y;
            px[0] = py[0] = 1.0;
            for (std::size_t k = 1; k <= d; ++k) {
                px[k] = px[k - 1] * X;
                py[k] = py[k - 1] * Y;
            }
            double e = 0.0;
            std::size_t idx = 0;
            for (std::size_t t = 0; t <= d; ++t) {
                for (std::size_t l = 0; l + t <= d; ++l) e += av[idx++] * px[t] * py[l];
            }
            field[i * width + j] = e;
        }
    }
    return make_result(
        std::move(field), {a, phi},
        [a, phi, warped, d, grid, height, width](const Tensor& g) {
            const auto& av = a.value();
            Tensor da(a.shape());
            Tensor dphi(phi.shape());
            std::vector<double> px(d + 1), py(d + 1);
            for (std::size_t i = 0; i < height; ++i) {
                for (std::size_t j = 0; j < width; ++j) {
                    double gv = g[i * width + j];
                    if (gv == 0.0) continue;
                    double X = (*warped)[2 * (i * width + j)];
                    double Y = (*warped)[2 * (i * width + j) + 1];
                    px[0] = py[0] = 1.0;
                    for (std::size_t k = 1; k <= d; ++k) {
                        px[k] = px[k - 1] * X;
                        py[k] = py[k - 1] * Y;
                    }
                    double dEdX = 0.0, dEdY = 0.0;
                    std::size_t idx = 0;
                    for (std::size_t t = 0; t <= d; ++t) {
                        for (std::size_t l = 0; l + t <= d; ++l, ++idx) {
                            da[idx] += gv * px[t] * py[l];
                            if (t > 0) dEdX += av[idx] * static_cast<double>(t) * px[t - 1] * py[l];
                            if (l > 0) dEdY += av[idx] * static_cast<double>(l) * px[t] * py[l - 1];
                        }
                    }
                    Bilinear b = bilinear_at(norm_coord(j, width), norm_coord(i, height), grid);
                    const std::size_t cs[4] = {b.c00, b.c01, b.c10, b.c11};
                    const double ws[4] = {b.w00, b.w01, b.w10, b.w11};
                    for (int k = 0; k < 4; ++k) {
                        dphi[2 * cs[k]] += gv * dEdX * ws[k];
                        dphi[2 * cs[k] + 1] += gv * dEdY * ws[k];
                    }
                }
            }
            push_grad(a, da);
            push_grad(phi, dphi);
        },
        "exposure_field");
}

Var apply_exposure(const Var& x, const Var& a, const Var& phi, int degree) {
    ImageDims dims = image_dims(x.value());
    Var field = exposure_field(a, phi, degree, dims.h, dims.w);
    Var field3 = reshape(field, {dims.h, dims.w, 1});
    Var logx = log(clamp(x, kLogFloor, 1.0));
    return clamp(exp(logx + field3), 0.0, 1.0);
}

Var offset_gradient_energy(const Var& phi) {
    const auto& pv = phi.value();
    if (pv.rank() != 3 || pv.dim(0) != pv.dim(1) || pv.dim(2) != 2) throw ShapeError("phi must be [G,G,2]");
    std::size_t g = pv.dim(0);
    auto at = [g](std::size_t r, std::size_t c, std::size_t k) { return (r * g + c) * 2 + k; };
    double e = 0.0;
    for (std::size_t r = 0; r < g; ++r) {
        for (std::size_t c = 0; c < g; ++c) {
            for (std::size_t k = 0; k < 2; ++k) {
                if (r + 1 < g) e += std::pow(pv[at(r + 1, c, k)] - pv[at(r, c, k)], 2);
                if (c + 1 < g) e += std::pow(pv[at(r, c + 1, k)] - pv[at(r, c, k)], 2);
            }
        }
    }
    return make_result(
        Tensor::scalar(e), {phi},
        [phi, g, at](const Tensor& gr) {
            const auto& pv = phi.value();
            Tensor d(phi.shape());
            double s = gr.item();
            for (std::size_t r = 0; r < g; ++r) {
                for (std::size_t c = 0; c < g; ++c) {
                    for (std::size_t k = 0; k < 2; ++k) {
                        if (r + 1 < g) {
                            double diff = pv[at(r + 1, c, k)] - pv[at(r, c, k)];
                            d[at(r + 1, c, k)] += 2 * s * diff;
                            d[at(r, c, k)] -= 2 * s * diff;
                        }
                        if (c + 1 < g) {
                            double diff = pv[at(r, c + 1, k)] - pv[at(r, c, k)];
                            d[at(r, c + 1, k)] += 2 * s * diff;
                            d[at(r, c, k)] -= 2 * s * diff;
                        }
                    }
                }
            }
            phi.node()->accumulate(d);
        },
        "offset_gradient_energy");
}

Var exposure_smoothness(const Var& a, const Var& phi, double lambda_a, double lambda_phi) {
    return neg(sum(a * a) * lambda_a) - offset_gradient_energy(phi) * lambda_phi;
}

namespace {

// Normalized kernel weights for one sigma plus the weighted mean squared radius.
// Writes (2r+1)^2 weights into `w` and returns E_w[u^2+v^2].
double kernel_weights(double sigma, std::size_t radius, double* w) {
    auto r = static_cast<long>(radius);
    double z = 0.0;
    std::size_t i = 0;
    for (long u = -r; u <= r; ++u) {
        for (long v = -r; v <= r; ++v, ++i) {
            w[i] = std::exp(-static_cast<double>(u * u + v * v) / (2.0 * sigma * sigma));
            z += w[i];
        }
    }
    double m = 0.0;
    i = 0;
    for (long u = -r; u <= r; ++u) {
        for (long v = -r; v <= r; ++v, ++i) {
            w[i] /= z;
            m += w[i] * static_cast<double>(u * u + v * v);
        }
    }
    return m;
}

}  // namespace

Var gaussian_kernel(const Var& sigma, std::size_t radius) {
    if (radius < 1) throw std::invalid_argument("gaussian kernel radius must be >= 1");
    if (sigma.value().size() != 1) throw ShapeError("gaussian_kernel sigma must be a single value");
    double raw = sigma.value()[0];
    double s = std::clamp(raw, kSigmaMin, kSigmaMax);
    std::size_t side = 2 * radius + 1;
    Tensor k({side, side});
    double m = kernel_weights(s, radius, k.data().data());
    auto kv = std::make_shared<Tensor>(k);
    bool active = raw >= kSigmaMin && raw <= kSigmaMax;
    return make_result(
        std::move(k), {sigma},
        [sigma, kv, m, s, radius, active](const Tensor& g) {
            double d = 0.0;
            if (active) {
                auto r = static_cast<long>(radius);
                std::size_t i = 0;
                for (long u = -r; u <= r; ++u) {
                    for (long v = -r; v <= r; ++v, ++i) {
                        d += g[i] * (*kv)[i] * (static_cast<double>(u * u + v * v) - m) / (s * s * s);
                    }
                }
            }
            sigma.node()->accumulate(Tensor(sigma.shape(), d));
        },
        "gaussian_kernel");
}

Var apply_blur(const Var& x, const Var& sigma_map, std::size_t kernel_size) {
    ImageDims dims = image_dims(x.value());
    const auto& sv = sigma_map.value();
    if (sv.rank() != 2 || sv.dim(0) != dims.h || sv.dim(1) != dims.w) {
        throw ShapeError("sigma map " + shape_str(sv.shape()) + " does not match image " + shape_str(x.shape()));
    }
    if (kernel_size < 3 || kernel_size % 2 == 0) throw std::invalid_argument("blur kernel size must be odd and >= 3");
    const std::size_t radius = (kernel_size - 1) / 2;
    const std::size_t taps = kernel_size * kernel_size;
    const std::size_t hw = dims.h * dims.w;

    // Per-pixel kernels and their mean squared radius.
    auto weights = std::make_shared<std::vector<double>>(hw * taps);
    auto msq = std::make_shared<std::vector<double>>(hw);
    // Reflected source pixel for every (pixel, tap).
    auto src = std::make_shared<std::vector<std::uint32_t>>(hw * taps);
    auto r = static_cast<long>(radius);
    for (std::size_t i = 0; i < dims.h; ++i) {
        for (std::size_t j = 0; j < dims.w; ++j) {
            std::size_t p = i * dims.w + j;
            double s = std::clamp(sv[p], kSigmaMin, kSigmaMax);
            (*msq)[p] = kernel_weights(s, radius, weights->data() + p * taps);
            std::size_t t = 0;
            for (long u = -r; u <= r; ++u) {
                for (long v = -r; v <= r; ++v, ++t) {
                    long yi = reflect101(static_cast<long>(i) + u, static_cast<long>(dims.h));
                    long xi = reflect101(static_cast<long>(j) + v, static_cast<long>(dims.w));
                    (*src)[p * taps + t] = static_cast<std::uint32_t>(yi * static_cast<long>(dims.w) + xi);
                }
            }
        }
    }

    const auto& xv = x.value();
    Tensor out(xv.shape());
    const std::size_t c = dims.c;
    for (std::size_t b = 0; b < dims.n; ++b) {
        const double* xb = xv.data().data() + b * hw * c;
        double* ob = out.data().data() + b * hw * c;
        for (std::size_t p = 0; p < hw; ++p) {
            const double* wp = weights->data() + p * taps;
            const std::uint32_t* sp = src->data() + p * taps;
            for (std::size_t t = 0; t < taps; ++t) {
                const double* xs = xb + sp[t] * c;
                for (std::size_t ch = 0; ch < c; ++ch) ob[p * c + ch] += wp[t] * xs[ch];
            }
        }
    }

    return make_result(
        std::move(out), {x, sigma_map},
        [x, sigma_map, weights, msq, src, dims, taps, radius](const Tensor& g) {
            const std::size_t hw = dims.h * dims.w;
            const std::size_t c = dims.c;
            const auto& xv = x.value();
            const auto& sv = sigma_map.value();
            bool want_x = x.requires_grad();
            bool want_s = sigma_map.requires_grad();
            Tensor dx = want_x ? Tensor(xv.shape()) : Tensor();
            Tensor ds = want_s ? Tensor(sv.shape()) : Tensor();
            // Squared radius of each tap.
            std::vector<double> rsq(taps);
            auto r = static_cast<long>(radius);
            std::size_t t0 = 0;
            for (long u = -r; u <= r; ++u) {
                for (long v = -r; v <= r; ++v) rsq[t0++] = static_cast<double>(u * u + v * v);
            }
            for (std::size_t b = 0; b < dims.n; ++b) {
                const double* xb = xv.data().data() + b * hw * c;
                const double* gb = g.data().data() + b * hw * c;
                double* dxb = want_x ? dx.data().data() + b * hw * c : nullptr;
                for (std::size_t p = 0; p < hw; ++p) {
                    const double* wp = weights->data() + p * taps;
                    const std::uint32_t* sp = src->data() + p * taps;
                    const double* gp = gb + p * c;
                    if (want_x) {
                        for (std::size_t t = 0; t < taps; ++t) {
                            double* dxs = dxb + sp[t] * c;
                            for (std::size_t ch = 0; ch < c; ++ch) dxs[ch] += wp[t] * gp[ch];
                        }
                    }
                    if (want_s) {
                        double raw = sv[p];
                        if (raw < kSigmaMin || raw > kSigmaMax) continue;
                        // dH/dsigma = H (r^2 - E_H[r^2]) / sigma^3
                        double s3 = raw * raw * raw;
                        double acc = 0.0;
                        for (std::size_t t = 0; t < taps; ++t) {
                            double coeff = wp[t] * (rsq[t] - (*msq)[p]);
                            if (coeff == 0.0) continue;
                            const double* xs = xb + sp[t] * c;
                            double dot = 0.0;
                            for (std::size_t ch = 0; ch < c; ++ch) dot += gp[ch] * xs[ch];
                            acc += coeff * dot;
                        }
                        ds[p] += acc / s3;
                    }
                }
            }
            if (want_x) x.node()->accumulate(dx);
            if (want_s) sigma_map.node()->accumulate(ds);
        },
        "apply_blur");
}

Var apply_noise(const Var& x, const Var& noise) {
    ImageDims dims = image_dims(x.value());
    const auto& nv = noise.value();
    if (nv.rank() != 3 || nv.dim(0) != dims.h || nv.dim(1) != dims.w || nv.dim(2) != dims.c) {
        throw ShapeError("noise map " + shape_str(nv.shape()) + " does not match image " + shape_str(x.shape()));
    }
    return clamp(x + noise, 0.0, 1.0);
}

Var apply_chain(const Var& x, const ChainVars& p) {
    Var e = apply_exposure(x, p.a, p.phi, p.degree);
    Var b = apply_blur(e, p.sigma_map, p.kernel_size);
    return apply_noise(b, p.noise);
}

}  // namespace ad

// ---- plain wrappers -------------------------------------------------------

Tensor exposure_field(const ExposureParams& params, std::size_t height, std::size_t width) {
    params.validate();
    return ad::exposure_field(ad::Var::constant(params.a), ad::Var::constant(params.phi), params.degree, height, width)
        .value();
}

Image apply_exposure(const Image& x, const ExposureParams& params) {
    params.validate();
    auto v = ad::apply_exposure(ad::Var::constant(x.pixels), ad::Var::constant(params.a),
                                ad::Var::constant(params.phi), params.degree);
    return Image(v.value(), x.label);
}

double exposure_smoothness(const ExposureParams& params) {
    params.validate();
    return ad::exposure_smoothness(ad::Var::constant(params.a), ad::Var::constant(params.phi), params.lambda_a,
                                   params.lambda_phi)
        .value()
        .item();
}

Tensor gaussian_kernel(double sigma, std::size_t radius) {
    return ad::gaussian_kernel(ad::Var::constant(sigma), radius).value();
}

Image apply_blur(const Image& x, const BlurParams& params) {
    params.validate();
    return Image(ad::apply_blur(ad::Var::constant(x.pixels), ad::Var::constant(params.sigma_map), params.kernel_size)
                     .value(),
                 x.label);
}

Image apply_noise(const Image& x, const NoiseParams& params) {
    return Image(ad::apply_noise(ad::Var::constant(x.pixels), ad::Var::constant(params.noise_map)).value(), x.label);
}

Image apply_statattack_chain(const Image& x, const AttackParams& params) {
    return apply_noise(apply_blur(apply_exposure(x, params.exposure), params.blur), params.noise);
}

}  // namespace statconsist
