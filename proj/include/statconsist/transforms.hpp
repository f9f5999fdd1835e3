#pragma once

#include <complex>
#include <vector>

#include "statconsist/autograd.hpp"
#include "statconsist/tensor.hpp"

namespace statconsist {

// Orthonormal type-II DCT basis, rows indexed by frequency: [n, n].
Tensor dct_matrix(std::size_t n);

// Orthonormal 2-D DCT-II of an [H,W] tensor and its inverse (DCT-III).
Tensor dct2(const Tensor& x);
Tensor idct2(const Tensor& x);

// Row-major complex field of shape [H,W].
struct ComplexField {
    std::size_t h = 0, w = 0;
    std::vector<std::complex<double>> v;

    std::complex<double>& at(std::size_t r, std::size_t c) { return v[r * w + c]; }
    std::complex<double> at(std::size_t r, std::size_t c) const { return v[r * w + c]; }
};

// Unnormalized forward DFT (sign -1); inverse applies 1/(H*W).
ComplexField dft2(const ComplexField& x);
ComplexField idft2(const ComplexField& x);
ComplexField to_complex(const Tensor& x);

// |DFT| of an [H,W] tensor, fftshifted so DC sits at (H/2, W/2).
Tensor dft_magnitude(const Tensor& x);
Tensor fftshift(const Tensor& x);

// Signed frequency of DFT index k for length n, in cycles per sample.
double dft_frequency(std::size_t k, std::size_t n);

namespace ad {

// Batched orthonormal DCT-II over the last two axes of [N,H,W].
Var dct2(const Var& x);

// Batched fftshifted DFT magnitude over the last two axes of [N,H,W].
// The gradient is zero at coefficients whose magnitude is exactly zero.
Var dft_magnitude(const Var& x);

}  // namespace ad

}  // namespace statconsist
