#include "statconsist/mmd.hpp"

#include <algorithm>
#include <cmath>

#include "statconsist/degradations.hpp"
#include "statconsist/detector.hpp"

namespace statconsist {

namespace {

void check_pair(const Tensor& x, const Tensor& y) {
    if (x.rank() != 2 || y.rank() != 2) throw ShapeError("MMD expects [N,F] feature matrices");
    if (x.dim(1) != y.dim(1)) {
        throw ShapeError("feature dimension mismatch: " + std::to_string(x.dim(1)) + " vs " + std::to_string(y.dim(1)));
    }
    if (x.dim(0) == 0 || y.dim(0) == 0) throw std::invalid_argument("MMD needs non-empty batches");
}

void check_bandwidths(std::span<const double> bw) {
    if (bw.empty()) throw std::invalid_argument("MMD needs at least one bandwidth");
    for (double b : bw) {
        if (!(b > 0.0)) throw std::invalid_argument("MMD bandwidths must be positive");
    }
}

double sqdist(const double* u, const double* v, std::size_t f) {
    double s = 0.0;
    for (std::size_t k = 0; k < f; ++k) {
        double d = u[k] - v[k];
        s += d * d;
    }
    return s;
}

// Returns k(u,v) and writes dk/d(|u-v|^2) to *slope.
double rbf_sum(double d2, std::span<const double> bw, double* slope) {
    double k = 0.0, s = 0.0;
    for (double b : bw) {
        double inv = 1.0 / (2.0 * b * b);
        double e = std::exp(-d2 * inv);
        k += e;
        s -= e * inv;
    }
    if (slope) *slope = s;
    return k;
}

double block_mean(const Tensor& a, const Tensor& b, std::span<const double> bw) {
    std::size_t n = a.dim(0), m = b.dim(0), f = a.dim(1);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < m; ++j) row += rbf_sum(sqdist(a.data().data() + i * f, b.data().data() + j * f, f), bw, nullptr);
        s += row;
    }
    return s / static_cast<double>(n * m);
}

// Adds scale * d(sum_ij k(a_i, b_j))/d a into `da`.
void block_grad(const Tensor& a, const Tensor& b, std::span<const double> bw, double scale, Tensor& da) {
    std::size_t n = a.dim(0), m = b.dim(0), f = a.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double slope = 0.0;
            rbf_sum(sqdist(a.data().data() + i * f, b.data().data() + j * f, f), bw, &slope);
            double c = scale * slope * 2.0;
            for (std::size_t k = 0; k < f; ++k) da[i * f + k] += c * (a[i * f + k] - b[j * f + k]);
        }
    }
}

}  // namespace

double mmd2(const FeatureBatch& x, const FeatureBatch& y, std::span<const double> bandwidths) {
    return ad::mmd2(ad::Var::constant(x.features), ad::Var::constant(y.features), bandwidths).value().item();
}

double median_heuristic(const FeatureBatch& x, const FeatureBatch& y) {
    check_pair(x.features, y.features);
    std::size_t f = x.dims();
    std::vector<const double*> rows;
    for (std::size_t i = 0; i < x.rows(); ++i) rows.push_back(x.features.data().data() + i * f);
    for (std::size_t i = 0; i < y.rows(); ++i) rows.push_back(y.features.data().data() + i * f);
    if (rows.size() < 2) throw std::invalid_argument("median heuristic needs at least two points");
    std::vector<double> d;
    d.reserve(rows.size() * (rows.size() - 1) / 2);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = i + 1; j < rows.size(); ++j) d.push_back(std::sqrt(sqdist(rows[i], rows[j], f)));
    }
    std::sort(d.begin(), d.end());
    std::size_t k = d.size();
    double med = k % 2 ? d[k / 2] : 0.5 * (d[k / 2 - 1] + d[k / 2]);
    return std::max(med, kBandwidthFloor);
}

std::vector<double> bandwidth_ladder(double median) {
    return {median / 4.0, median / 2.0, median, 2.0 * median, 4.0 * median};
}

namespace ad {

Var mmd2(const Var& x, const Var& y, std::span<const double> bandwidths) {
    const auto& X = x.value();
    const auto& Y = y.value();
    check_pair(X, Y);
    check_bandwidths(bandwidths);
    std::vector<double> bw(bandwidths.begin(), bandwidths.end());
    double v = block_mean(X, X, bw) + block_mean(Y, Y, bw) - 2.0 * block_mean(X, Y, bw);
    return make_result(
        Tensor::scalar(v), {x, y},
        [x, y, bw](const Tensor& g) {
            const auto& X = x.value();
            const auto& Y = y.value();
            double n = static_cast<double>(X.dim(0)), m = static_cast<double>(Y.dim(0));
            double s = g.item();
            if (x.requires_grad()) {
                Tensor dx(X.shape());
                // Each unordered pair appears twice in the xx block.
                block_grad(X, X, bw, s * 2.0 / (n * n), dx);
                block_grad(X, Y, bw, -s * 2.0 / (n * m), dx);
                x.node()->accumulate(dx);
            }
            if (y.requires_grad()) {
                Tensor dy(Y.shape());
                block_grad(Y, Y, bw, s * 2.0 / (m * m), dy);
                block_grad(Y, X, bw, -s * 2.0 / (n * m), dy);
                y.node()->accumulate(dy);
            }
        },
        "mmd2");
}

}  // namespace ad

std::vector<SweepRow> mmd_blur_sweep(const std::vector<Image>& fakes, const std::vector<Image>& reals,
                                     const Detector& detector, std::span<const double> sigmas,
                                     std::size_t kernel_size) {
    if (fakes.empty() || reals.empty()) throw std::invalid_argument("mmd_blur_sweep needs non-empty image sets");
    if (!detector.trained()) throw std::logic_error("mmd_blur_sweep requires a trained detector");
    FeatureBatch real_feats{detector.features(reals), Provenance::real};
    FeatureBatch base{detector.features(fakes), Provenance::fake};
    auto bw = bandwidth_ladder(median_heuristic(base, real_feats));
    std::vector<SweepRow> rows;
    for (double sigma : sigmas) {
        FeatureBatch feats = base;
        if (sigma > 0.0) {
            Tensor batch = stack(fakes);
            Tensor smap({batch.dim(1), batch.dim(2)}, sigma);
            Tensor blurred = ad::apply_blur(ad::Var::constant(batch), ad::Var::constant(smap), kernel_size).value();
            feats.features = detector.features(unstack(blurred, Provenance::fake));
        }
        rows.push_back({sigma, mmd2(feats, real_feats, bw)});
    }
    return rows;
}

}  // namespace statconsist
