#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "statconsist/autograd.hpp"
#include "statconsist/detector.hpp"
#include "statconsist/image.hpp"
#include "statconsist/synth.hpp"
#include "statconsist/tensor.hpp"

namespace testing {

using statconsist::Image;
using statconsist::Shape;
using statconsist::Tensor;
namespace ad = statconsist::ad;

inline Tensor uniform(std::mt19937_64& rng, Shape shape, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = u(rng);
    return t;
}

// Values in [lo, hi] with magnitude at least `gap`, so kinks at zero are avoided.
inline Tensor away_from_zero(std::mt19937_64& rng, Shape shape, double hi, double gap) {
    std::uniform_real_distribution<double> u(gap, hi);
    std::bernoulli_distribution sign(0.5);
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = sign(rng) ? u(rng) : -u(rng);
    return t;
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

using ScalarFn = std::function<ad::Var(const std::vector<ad::Var>&)>;

struct GradCheck {
    double rel_error = 0.0;
    std::size_t coords = 0;
};

/**
 * Compares reverse-mode gradients of a scalar function with central differences.
 *
 * Up to `max_coords` coordinates per input are sampled (all of them when the
 * input is smaller). The error is ||analytic - numeric|| / max(||analytic||,
 * ||numeric||, floor) over the sampled coordinates.
 */
inline GradCheck check_gradients(const ScalarFn& fn, const std::vector<Tensor>& inputs, std::mt19937_64& rng,
                                 std::size_t max_coords = 64, double h = 1e-5, double floor = 1e-8) {
    std::vector<ad::Var> leaves;
    for (const auto& t : inputs) leaves.push_back(ad::Var::leaf(t));
    ad::Var root = fn(leaves);
    ad::backward(root);

    double diff2 = 0.0, an2 = 0.0, num2 = 0.0;
    GradCheck out;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        Tensor g = leaves[k].grad();
        std::vector<std::size_t> idx(inputs[k].size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        if (idx.size() > max_coords) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(max_coords);
        }
        for (std::size_t i : idx) {
            auto eval = [&](double delta) {
                std::vector<ad::Var> vs;
                for (std::size_t j = 0; j < inputs.size(); ++j) {
                    Tensor t = inputs[j];
                    if (j == k) t[i] += delta;
                    vs.push_back(ad::Var::constant(t));
                }
                return fn(vs).value().item();
            };
            double numeric = (eval(h) - eval(-h)) / (2.0 * h);
            double analytic = g[i];
            diff2 += (analytic - numeric) * (analytic - numeric);
            an2 += analytic * analytic;
            num2 += numeric * numeric;
            ++out.coords;
        }
    }
    out.rel_error = std::sqrt(diff2) / std::max({std::sqrt(an2), std::sqrt(num2), floor});
    return out;
}

// Contracts a tensor-valued output to a scalar with fixed random weights so every
// output element contributes to the checked gradient.
inline ad::Var project(const ad::Var& y, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return ad::sum(ad::mul(y, ad::Var::constant(uniform(rng, y.shape(), -1.0, 1.0))));
}

inline Image random_image(std::mt19937_64& rng, std::size_t h, std::size_t w, std::size_t c, double lo = 0.0,
                          double hi = 1.0) {
    return Image(uniform(rng, {h, w, c}, lo, hi), statconsist::Provenance::fake);
}

inline Image constant_image(std::size_t h, std::size_t w, std::size_t c, double v) {
    return Image(Tensor({h, w, c}, v), statconsist::Provenance::real);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("statconsist_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline statconsist::CorpusSpec small_corpus(std::size_t n = 60, std::size_t size = 32, std::uint64_t seed = 3) {
    statconsist::CorpusSpec s;
    s.n_per_class = n;
    s.size = size;
    s.seed = seed;
    return s;
}

// Spatial detector trained on a 32x32 corpus; shared by the attack and
// evaluation tests.
struct SmallWorld {
    statconsist::Corpus train;
    statconsist::Corpus attack;
    statconsist::Detector detector{statconsist::DetectorSpec{}};
};

inline const SmallWorld& small_world() {
    static const SmallWorld world = [] {
        SmallWorld w;
        auto spec = small_corpus(80, 32, 11);
        w.train = statconsist::generate_corpus(spec);
        auto aspec = spec;
        aspec.n_per_class = 12;
        w.attack = statconsist::generate_corpus(aspec, 80);
        statconsist::DetectorSpec ds;
        ds.input_size = 32;
        ds.conv_channels = {8, 16};
        ds.seed = 5;
        w.detector = statconsist::Detector(ds);
        statconsist::TrainConfig tc;
        tc.epochs = 12;
        tc.lr = 0.05;
        tc.batch = 16;
        tc.seed = 5;
        statconsist::train(w.detector, statconsist::LabeledImages::from(w.train.reals, w.train.fakes), tc);
        return w;
    }();
    return world;
}

}  // namespace testing
