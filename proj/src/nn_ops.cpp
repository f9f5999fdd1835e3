#include <algorithm>
#include <cmath>

#include "statconsist/autograd.hpp"

namespace statconsist::ad {

Var matmul(const Var& a, const Var& b) {
    const auto& A = a.value();
    const auto& B = b.value();
    if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0)) {
        throw ShapeError("matmul shapes " + shape_str(A.shape()) + " x " + shape_str(B.shape()));
    }
    std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
    Tensor r({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        double* out = &r[i * n];
        for (std::size_t p = 0; p < k; ++p) {
            double av = A[i * k + p];
            if (av == 0.0) continue;
            const double* brow = &B.data()[p * n];
            for (std::size_t j = 0; j < n; ++j) out[j] += av * brow[j];
        }
    }
    return make_result(
        std::move(r), {a, b},
        [a, b, m, k, n](const Tensor& g) {
            const auto& A = a.value();
            const auto& B = b.value();
            if (a.requires_grad()) {
                Tensor da({m, k});
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * B[p * n + j];
                        da[i * k + p] = s;
                    }
                }
                a.node()->accumulate(da);
            }
            if (b.requires_grad()) {
                Tensor db({k, n});
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                        double av = A[i * k + p];
                        if (av == 0.0) continue;
                        for (std::size_t j = 0; j < n; ++j) db[p * n + j] += av * g[i * n + j];
                    }
                }
                b.node()->accumulate(db);
            }
        },
        "matmul");
}

namespace {

struct ConvGeometry {
    std::size_t n, h, w, cin, kh, kw, cout, stride, pad, oh, ow;
};

}  // namespace

Var conv2d(const Var& input, const Var& kernel, std::size_t stride, std::size_t pad) {
    const auto& X = input.value();
    const auto& K = kernel.value();
    bool batched = X.rank() == 4;
    if (!batched && X.rank() != 3) throw ShapeError("conv2d input must be [H,W,C] or [N,H,W,C]");
    if (K.rank() != 4) throw ShapeError("conv2d kernel must be [kh,kw,Cin,Cout]");
    if (stride == 0) throw std::invalid_argument("conv2d stride must be positive");
    ConvGeometry geo{};
    geo.n = batched ? X.dim(0) : 1;
    geo.h = X.dim(batched ? 1 : 0);
    geo.w = X.dim(batched ? 2 : 1);
    geo.cin = X.dim(batched ? 3 : 2);
    geo.kh = K.dim(0);
    geo.kw = K.dim(1);
    geo.cout = K.dim(3);
    geo.stride = stride;
    geo.pad = pad;
    if (K.dim(2) != geo.cin) throw ShapeError("conv2d kernel input channels do not match input");
    if (geo.kh % 2 == 0 || geo.kw % 2 == 0) throw ShapeError("conv2d kernel spatial dims must be odd");
    if (geo.kh > geo.h + 2 * pad || geo.kw > geo.w + 2 * pad) {
        throw ShapeError("conv2d kernel larger than padded input");
    }
    geo.oh = (geo.h + 2 * pad - geo.kh) / stride + 1;
    geo.ow = (geo.w + 2 * pad - geo.kw) / stride + 1;

    Shape out_shape = batched ? Shape{geo.n, geo.oh, geo.ow, geo.cout} : Shape{geo.oh, geo.ow, geo.cout};
    Tensor r(out_shape);
    const double* xd = X.data().data();
    const double* kd = K.data().data();
    double* rd = r.data().data();
    const auto& gm = geo;
    for (std::size_t b = 0; b < gm.n; ++b) {
        for (std::size_t oy = 0; oy < gm.oh; ++oy) {
            for (std::size_t ox = 0; ox < gm.ow; ++ox) {
                double* out = rd + ((b * gm.oh + oy) * gm.ow + ox) * gm.cout;
                for (std::size_t ky = 0; ky < gm.kh; ++ky) {
                    long iy = static_cast<long>(oy * gm.stride + ky) - static_cast<long>(gm.pad);
                    if (iy < 0 || iy >= static_cast<long>(gm.h)) continue;
                    for (std::size_t kx = 0; kx < gm.kw; ++kx) {
                        long ix = static_cast<long>(ox * gm.stride + kx) - static_cast<long>(gm.pad);
                        if (ix < 0 || ix >= static_cast<long>(gm.w)) continue;
                        const double* xin = xd + ((b * gm.h + iy) * gm.w + ix) * gm.cin;
                        const double* kk = kd + (ky * gm.kw + kx) * gm.cin * gm.cout;
                        for (std::size_t ci = 0; ci < gm.cin; ++ci) {
                            double xv = xin[ci];
                            const double* krow = kk + ci * gm.cout;
                            for (std::size_t co = 0; co < gm.cout; ++co) out[co] += xv * krow[co];
                        }
                    }
                }
            }
        }
    }
    return make_result(
        std::move(r), {input, kernel},
        [input, kernel, geo](const Tensor& g) {
            const auto& X = input.value();
            const auto& K = kernel.value();
            const double* xd = X.data().data();
            const double* kd = K.data().data();
            const double* gd = g.data().data();
            bool want_x = input.requires_grad();
            bool want_k = kernel.requires_grad();
            Tensor dx = want_x ? Tensor(X.shape()) : Tensor();
            Tensor dk = want_k ? Tensor(K.shape()) : Tensor();
            double* dxd = want_x ? dx.data().data() : nullptr;
            double* dkd = want_k ? dk.data().data() : nullptr;
            for (std::size_t b = 0; b < geo.n; ++b) {
                for (std::size_t oy = 0; oy < geo.oh; ++oy) {
                    for (std::size_t ox = 0; ox < geo.ow; ++ox) {
                        const double* go = gd + ((b * geo.oh + oy) * geo.ow + ox) * geo.cout;
                        for (std::size_t ky = 0; ky < geo.kh; ++ky) {
                            long iy = static_cast<long>(oy * geo.stride + ky) - static_cast<long>(geo.pad);
                            if (iy < 0 || iy >= static_cast<long>(geo.h)) continue;
                            for (std::size_t kx = 0; kx < geo.kw; ++kx) {
                                long ix = static_cast<long>(ox * geo.stride + kx) - static_cast<long>(geo.pad);
                                if (ix < 0 || ix >= static_cast<long>(geo.w)) continue;
                                std::size_t xoff = ((b * geo.h + iy) * geo.w + ix) * geo.cin;
                                std::size_t koff = (ky * geo.kw + kx) * geo.cin * geo.cout;
                                for (std::size_t ci = 0; ci < geo.cin; ++ci) {
                                    const double* krow = kd + koff + ci * geo.cout;
                                    if (want_x) {
                                        double s = 0.0;
                                        for (std::size_t co = 0; co < geo.cout; ++co) s += go[co] * krow[co];
                                        dxd[xoff + ci] += s;
                                    }
                                    if (want_k) {
                                        double xv = xd[xoff + ci];
                                        double* dkrow = dkd + koff + ci * geo.cout;
                                        for (std::size_t co = 0; co < geo.cout; ++co) dkrow[co] += xv * go[co];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if (want_x) input.node()->accumulate(dx);
            if (want_k) kernel.node()->accumulate(dk);
        },
        "conv2d");
}

Var global_avg_pool(const Var& x) {
    const auto& X = x.value();
    if (X.rank() != 4) throw ShapeError("global_avg_pool expects [N,H,W,C]");
    std::size_t n = X.dim(0), hw = X.dim(1) * X.dim(2), c = X.dim(3);
    Tensor r({n, c});
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t p = 0; p < hw; ++p) {
            for (std::size_t ch = 0; ch < c; ++ch) r[b * c + ch] += X[(b * hw + p) * c + ch];
        }
        for (std::size_t ch = 0; ch < c; ++ch) r[b * c + ch] /= static_cast<double>(hw);
    }
    return make_result(
        std::move(r), {x},
        [x, n, hw, c](const Tensor& g) {
            Tensor d(x.shape());
            for (std::size_t b = 0; b < n; ++b) {
                for (std::size_t p = 0; p < hw; ++p) {
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        d[(b * hw + p) * c + ch] = g[b * c + ch] / static_cast<double>(hw);
                    }
                }
            }
            x.node()->accumulate(d);
        },
        "global_avg_pool");
}

Var channel_mean(const Var& x) {
    const auto& X = x.value();
    if (X.rank() != 4) throw ShapeError("channel_mean expects [N,H,W,C]");
    std::size_t pixels = X.dim(0) * X.dim(1) * X.dim(2), c = X.dim(3);
    Tensor r({X.dim(0), X.dim(1), X.dim(2)});
    for (std::size_t p = 0; p < pixels; ++p) {
        double s = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch) s += X[p * c + ch];
        r[p] = s / static_cast<double>(c);
    }
    return make_result(
        std::move(r), {x},
        [x, pixels, c](const Tensor& g) {
            Tensor d(x.shape());
            for (std::size_t p = 0; p < pixels; ++p) {
                for (std::size_t ch = 0; ch < c; ++ch) d[p * c + ch] = g[p] / static_cast<double>(c);
            }
            x.node()->accumulate(d);
        },
        "channel_mean");
}

Var softmax(const Var& logits) {
    const auto& L = logits.value();
    if (L.rank() == 0) throw ShapeError("softmax needs at least one axis");
    std::size_t k = L.shape().back();
    std::size_t rows = L.size() / k;
    Tensor r(L.shape());
    for (std::size_t i = 0; i < rows; ++i) {
        double mx = L[i * k];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, L[i * k + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += (r[i * k + j] = std::exp(L[i * k + j] - mx));
        for (std::size_t j = 0; j < k; ++j) r[i * k + j] /= z;
    }
    auto probs = std::make_shared<Tensor>(r);
    return make_result(
        std::move(r), {logits},
        [logits, probs, rows, k](const Tensor& g) {
            Tensor d(logits.shape());
            for (std::size_t i = 0; i < rows; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < k; ++j) dot += g[i * k + j] * (*probs)[i * k + j];
                for (std::size_t j = 0; j < k; ++j) d[i * k + j] = (*probs)[i * k + j] * (g[i * k + j] - dot);
            }
            logits.node()->accumulate(d);
        },
        "softmax");
}

Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels) {
    const auto& L = logits.value();
    if (L.rank() != 2 || L.dim(0) != labels.size()) throw ShapeError("cross-entropy expects [N,K] logits and N labels");
    std::size_t n = L.dim(0), k = L.dim(1);
    auto probs = std::make_shared<Tensor>(Shape{n, k});
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) throw std::out_of_range("label out of range");
        double mx = L[i * k];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, L[i * k + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(L[i * k + j] - mx);
        for (std::size_t j = 0; j < k; ++j) (*probs)[i * k + j] = std::exp(L[i * k + j] - mx) / z;
        loss += -(L[i * k + labels[i]] - mx - std::log(z));
    }
    loss /= static_cast<double>(n);
    return make_result(
        Tensor::scalar(loss), {logits},
        [logits, probs, labels, n, k](const Tensor& g) {
            Tensor d({n, k});
            double scale = g.item() / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < k; ++j) {
                    double t = static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0;
                    d[i * k + j] = scale * ((*probs)[i * k + j] - t);
                }
            }
            logits.node()->accumulate(d);
        },
        "softmax_cross_entropy");
}

}  // namespace statconsist::ad
