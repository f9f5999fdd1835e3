#pragma once

#include <cstddef>

#include "statconsist/autograd.hpp"
#include "statconsist/image.hpp"
#include "statconsist/tensor.hpp"

namespace statconsist {

inline constexpr double kSigmaMin = 1e-3;
inline constexpr double kSigmaMax = 5.0;
// Pixels are floored at this value before the log-domain exposure.
inline constexpr double kLogFloor = 1e-4;

// (D+1)(D+2)/2 coefficients of a bivariate polynomial of total degree D.
std::size_t exposure_coefficient_count(int degree);
// Flat position of a_{t,l} in the coefficient vector, ordered t = 0..D, l = 0..D-t.
std::size_t exposure_coefficient_index(int degree, int t, int l);

/**
 * Log-domain polynomial exposure field warped by a grid of control-point offsets.
 *
 * `phi` has shape [G,G,2]: row index runs along y, column along x, and the last
 * axis holds the (dx, dy) offset in normalized coordinates.
 */
struct ExposureParams {
    Tensor a;
    Tensor phi;
    int degree = 11;
    double lambda_a = 0.1;
    double lambda_phi = 0.1;

    static ExposureParams identity(int degree = 11, std::size_t grid = 5);

    std::size_t grid() const { return phi.dim(0); }
    double cell_width() const { return 1.0 / static_cast<double>(grid() - 1); }
    // Limits every offset to half a cell.
    void clamp_offsets();
    void validate() const;
};

struct BlurParams {
    Tensor sigma_map;  // [H,W]
    std::size_t kernel_size = 3;  // odd side length

    static BlurParams identity(std::size_t height, std::size_t width, std::size_t kernel_size = 3);

    std::size_t radius() const { return (kernel_size - 1) / 2; }
    void clamp_sigma();
    void validate() const;
};

struct NoiseParams {
    Tensor noise_map;  // [H,W,C]
    double epsilon = 8.0 / 255.0;

    static NoiseParams identity(std::size_t height, std::size_t width, std::size_t channels,
                                double epsilon = 8.0 / 255.0);

    // L-infinity projection; afterwards max|noise_map| <= epsilon exactly.
    void project();
};

struct AttackParams {
    ExposureParams exposure;
    BlurParams blur;
    NoiseParams noise;

    static AttackParams identity(std::size_t height, std::size_t width, std::size_t channels, int degree = 11,
                                 std::size_t grid = 5, std::size_t kernel_size = 3, double epsilon = 8.0 / 255.0);
};

// ---- differentiable operators --------------------------------------------
//
// Image arguments are [H,W,C] or batched [N,H,W,C]; parameters broadcast over
// the batch and, for exposure and blur, over channels.

namespace ad {

// [H,W] log-exposure field; differentiable in `a` and `phi`.
Var exposure_field(const Var& a, const Var& phi, int degree, std::size_t height, std::size_t width);

// exp(log(max(x, floor)) + E), clamped to [0,1].
Var apply_exposure(const Var& x, const Var& a, const Var& phi, int degree);

// -lambda_a * |a|^2 - lambda_phi * |grad phi|^2, grad phi being forward
// differences between neighbouring control points in both grid directions.
Var exposure_smoothness(const Var& a, const Var& phi, double lambda_a, double lambda_phi);

// Sum of squared forward differences of phi along both grid axes.
Var offset_gradient_energy(const Var& phi);

// Normalized isotropic Gaussian on a (2*radius+1)^2 grid. sigma is clamped to
// [kSigmaMin, kSigmaMax]; the gradient vanishes outside that range.
Var gaussian_kernel(const Var& sigma, std::size_t radius);

// Spatially varying Gaussian blur with one kernel per pixel, reflect-101 borders.
Var apply_blur(const Var& x, const Var& sigma_map, std::size_t kernel_size);

// clamp(x + noise, 0, 1); the clamp passes gradient only where it did not bind.
Var apply_noise(const Var& x, const Var& noise);

struct ChainVars {
    Var a, phi, sigma_map, noise;
    int degree = 11;
    std::size_t kernel_size = 3;
};

// Noise(Blur(Exposure(x))).
Var apply_chain(const Var& x, const ChainVars& p);

}  // namespace ad

// ---- plain-value wrappers -------------------------------------------------

Tensor exposure_field(const ExposureParams& params, std::size_t height, std::size_t width);
Image apply_exposure(const Image& x, const ExposureParams& params);
double exposure_smoothness(const ExposureParams& params);
Tensor gaussian_kernel(double sigma, std::size_t radius);
Image apply_blur(const Image& x, const BlurParams& params);
Image apply_noise(const Image& x, const NoiseParams& params);
Image apply_statattack_chain(const Image& x, const AttackParams& params);

}  // namespace statconsist
