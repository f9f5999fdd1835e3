#pragma once

#include <span>
#include <vector>

#include "statconsist/autograd.hpp"
#include "statconsist/image.hpp"

namespace statconsist {

class Detector;

/// N feature vectors of dimension F, one per row.
struct FeatureBatch {
    Tensor features;  // [N,F]
    Provenance source = Provenance::real;

    std::size_t rows() const { return features.dim(0); }
    std::size_t dims() const { return features.dim(1); }
};

inline constexpr double kBandwidthFloor = 1e-6;

/// Biased (V-statistic) squared MMD under a sum of RBF kernels
/// k(u,v) = sum_b exp(-|u-v|^2 / (2 b^2)).
double mmd2(const FeatureBatch& x, const FeatureBatch& y, std::span<const double> bandwidths);

// Median pairwise Euclidean distance over the pooled rows of x and y.
double median_heuristic(const FeatureBatch& x, const FeatureBatch& y);

// {m/4, m/2, m, 2m, 4m}
std::vector<double> bandwidth_ladder(double median);

namespace ad {

// Differentiable in both arguments; x and y are [N,F] and [M,F].
Var mmd2(const Var& x, const Var& y, std::span<const double> bandwidths);

}  // namespace ad

struct SweepRow {
    double sigma;
    double mmd2;
};

/**
 * Blurs every fake uniformly with each sigma, extracts detector features for
 * fakes and reals, and reports the squared MMD between the two sets. sigma = 0
 * means the fakes are left untouched. Bandwidths come from the unblurred pair
 * and stay fixed across the sweep.
 */
std::vector<SweepRow> mmd_blur_sweep(const std::vector<Image>& fakes, const std::vector<Image>& reals,
                                     const Detector& detector, std::span<const double> sigmas,
                                     std::size_t kernel_size = 3);

}  // namespace statconsist
