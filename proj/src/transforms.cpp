#include "statconsist/transforms.hpp"

#include <cmath>
#include <numbers>

namespace statconsist {

namespace {

using cd = std::complex<double>;

bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

// In-place 1-D DFT with sign -1 (forward) or +1 (inverse, unnormalized).
void dft1d(std::vector<cd>& a, int sign) {
    const std::size_t n = a.size();
    if (n <= 1) return;
    if (!is_pow2(n)) {
        std::vector<cd> out(n);
        for (std::size_t k = 0; k < n; ++k) {
            cd s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                double ang = sign * 2.0 * std::numbers::pi * static_cast<double>((k * j) % n) / static_cast<double>(n);
                s += a[j] * cd(std::cos(ang), std::sin(ang));
            }
            out[k] = s;
        }
        a.swap(out);
        return;
    }
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                // Twiddles from cos/sin directly rather than by repeated
                // multiplication so round-off does not accumulate.
                double a_k = ang * static_cast<double>(k);
                cd w(std::cos(a_k), std::sin(a_k));
                cd u = a[i + k];
                cd v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

ComplexField transform2(const ComplexField& x, int sign) {
    ComplexField r = x;
    std::vector<cd> buf(r.w);
    for (std::size_t row = 0; row < r.h; ++row) {
        for (std::size_t c = 0; c < r.w; ++c) buf[c] = r.at(row, c);
        dft1d(buf, sign);
        for (std::size_t c = 0; c < r.w; ++c) r.at(row, c) = buf[c];
    }
    buf.resize(r.h);
    for (std::size_t c = 0; c < r.w; ++c) {
        for (std::size_t row = 0; row < r.h; ++row) buf[row] = r.at(row, c);
        dft1d(buf, sign);
        for (std::size_t row = 0; row < r.h; ++row) r.at(row, c) = buf[row];
    }
    return r;
}

void require_2d(const Tensor& x, const char* what) {
    if (x.rank() != 2) throw ShapeError(std::string(what) + " expects an [H,W] tensor");
}

// out = A * X * B^T for [n,n] A, [h,w] X, [m,m] B (A rows = h, B rows = w).
void sandwich(const double* A, const double* X, const double* B, double* out, std::size_t h, std::size_t w,
              bool transpose_a, bool transpose_b) {
    std::vector<double> tmp(h * w, 0.0);
    // tmp = op(A) * X
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t k = 0; k < h; ++k) {
            double a = transpose_a ? A[k * h + i] : A[i * h + k];
            if (a == 0.0) continue;
            const double* xr = X + k * w;
            double* tr = tmp.data() + i * w;
            for (std::size_t j = 0; j < w; ++j) tr[j] += a * xr[j];
        }
    }
    // out = tmp * op(B)^T
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < w; ++k) {
                double b = transpose_b ? B[k * w + j] : B[j * w + k];
                s += tmp[i * w + k] * b;
            }
            out[i * w + j] = s;
        }
    }
}

}  // namespace

Tensor dct_matrix(std::size_t n) {
    Tensor c({n, n});
    for (std::size_t k = 0; k < n; ++k) {
        double alpha = k == 0 ? std::sqrt(1.0 / static_cast<double>(n)) : std::sqrt(2.0 / static_cast<double>(n));
        for (std::size_t j = 0; j < n; ++j) {
            c[k * n + j] = alpha * std::cos(std::numbers::pi * (2.0 * static_cast<double>(j) + 1.0) *
                                            static_cast<double>(k) / (2.0 * static_cast<double>(n)));
        }
    }
    return c;
}

Tensor dct2(const Tensor& x) {
    require_2d(x, "dct2");
    std::size_t h = x.dim(0), w = x.dim(1);
    if (h < 2 || w < 2) throw ShapeError("dct2 needs H,W >= 2");
    Tensor ch = dct_matrix(h), cw = dct_matrix(w);
    Tensor r({h, w});
    sandwich(ch.data().data(), x.data().data(), cw.data().data(), r.data().data(), h, w, false, false);
    return r;
}

Tensor idct2(const Tensor& x) {
    require_2d(x, "idct2");
    std::size_t h = x.dim(0), w = x.dim(1);
    if (h < 2 || w < 2) throw ShapeError("idct2 needs H,W >= 2");
    Tensor ch = dct_matrix(h), cw = dct_matrix(w);
    Tensor r({h, w});
    sandwich(ch.data().data(), x.data().data(), cw.data().data(), r.data().data(), h, w, true, true);
    return r;
}

ComplexField to_complex(const Tensor& x) {
    require_2d(x, "to_complex");
    ComplexField f{x.dim(0), x.dim(1), std::vector<cd>(x.size())};
    for (std::size_t i = 0; i < x.size(); ++i) f.v[i] = x[i];
    return f;
}

ComplexField dft2(const ComplexField& x) { return transform2(x, -1); }

ComplexField idft2(const ComplexField& x) {
    ComplexField r = transform2(x, +1);
    double scale = 1.0 / static_cast<double>(r.h * r.w);
    for (auto& v : r.v) v *= scale;
    return r;
}

Tensor fftshift(const Tensor& x) {
    require_2d(x, "fftshift");
    std::size_t h = x.dim(0), w = x.dim(1);
    Tensor r({h, w});
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) r[((i + h / 2) % h) * w + (j + w / 2) % w] = x[i * w + j];
    }
    return r;
}

Tensor dft_magnitude(const Tensor& x) {
    ComplexField f = dft2(to_complex(x));
    Tensor m({f.h, f.w});
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::abs(f.v[i]);
    return fftshift(m);
}

double dft_frequency(std::size_t k, std::size_t n) {
    auto kk = static_cast<double>(k);
    auto nn = static_cast<double>(n);
    return k < (n + 1) / 2 ? kk / nn : (kk - nn) / nn;
}

namespace ad {

Var dct2(const Var& x) {
    const auto& X = x.value();
    if (X.rank() != 3) throw ShapeError("batched dct2 expects [N,H,W]");
    std::size_t n = X.dim(0), h = X.dim(1), w = X.dim(2);
    if (h < 2 || w < 2) throw ShapeError("dct2 needs H,W >= 2");
    auto ch = std::make_shared<Tensor>(dct_matrix(h));
    auto cw = std::make_shared<Tensor>(dct_matrix(w));
    Tensor r(X.shape());
    for (std::size_t b = 0; b < n; ++b) {
        sandwich(ch->data().data(), X.data().data() + b * h * w, cw->data().data(), r.data().data() + b * h * w, h, w,
                 false, false);
    }
    return make_result(
        std::move(r), {x},
        [x, ch, cw, n, h, w](const Tensor& g) {
            Tensor d(x.shape());
            for (std::size_t b = 0; b < n; ++b) {
                sandwich(ch->data().data(), g.data().data() + b * h * w, cw->data().data(),
                         d.data().data() + b * h * w, h, w, true, true);
            }
            x.node()->accumulate(d);
        },
        "dct2");
}

Var dft_magnitude(const Var& x) {
    const auto& X = x.value();
    if (X.rank() != 3) throw ShapeError("batched dft_magnitude expects [N,H,W]");
    std::size_t n = X.dim(0), h = X.dim(1), w = X.dim(2);
    auto spectra = std::make_shared<std::vector<ComplexField>>();
    spectra->reserve(n);
    Tensor r(X.shape());
    for (std::size_t b = 0; b < n; ++b) {
        ComplexField f{h, w, std::vector<cd>(h * w)};
        for (std::size_t i = 0; i < h * w; ++i) f.v[i] = X[b * h * w + i];
        f = dft2(f);
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                r[b * h * w + ((i + h / 2) % h) * w + (j + w / 2) % w] = std::abs(f.at(i, j));
            }
        }
        spectra->push_back(std::move(f));
    }
    return make_result(
        std::move(r), {x},
        [x, spectra, n, h, w](const Tensor& g) {
            // d|F_uv|/dx_mn = Re(conj(F_uv)/|F_uv| * e^{-2 pi i (um/h + vn/w)}), so the
            // input gradient is the real part of a forward DFT of the weighted phases.
            Tensor d(x.shape());
            for (std::size_t b = 0; b < n; ++b) {
                const ComplexField& f = (*spectra)[b];
                ComplexField wgt{h, w, std::vector<cd>(h * w)};
                for (std::size_t i = 0; i < h; ++i) {
                    for (std::size_t j = 0; j < w; ++j) {
                        cd fv = f.at(i, j);
                        double mag = std::abs(fv);
                        double gv = g[b * h * w + ((i + h / 2) % h) * w + (j + w / 2) % w];
                        wgt.at(i, j) = mag > 0.0 ? gv * std::conj(fv) / mag : cd(0.0);
                    }
                }
                ComplexField back = statconsist::dft2(wgt);
                for (std::size_t i = 0; i < h * w; ++i) d[b * h * w + i] = back.v[i].real();
            }
            x.node()->accumulate(d);
        },
        "dft_magnitude");
}

}  // namespace ad

}  // namespace statconsist
