#include <doctest.h>

#include <cmath>

#include "statconsist/detector.hpp"
#include "statconsist/transforms.hpp"
#include "support.hpp"

using namespace statconsist;
using testing::uniform;

namespace {

DetectorSpec spec_of(DetectorKind kind, std::uint64_t seed = 1) {
    DetectorSpec s;
    s.kind = kind;
    s.input_size = 32;
    s.conv_channels = {4, 8};
    s.hidden = 8;
    s.seed = seed;
    return s;
}

constexpr DetectorKind kAllKinds[] = {DetectorKind::spatial_cnn, DetectorKind::dct_freq, DetectorKind::fft_freq};

}  // namespace

TEST_CASE("detector spec validation") {
    DetectorSpec s;
    s.input_size = 48;
    CHECK_THROWS(s.validate());
    s.input_size = 64;
    s.conv_channels.clear();
    CHECK_THROWS(s.validate());
    s.kind = DetectorKind::dct_freq;
    CHECK_NOTHROW(s.validate());
    CHECK(parse_detector_kind("fft_freq") == DetectorKind::fft_freq);
    CHECK_THROWS(parse_detector_kind("resnet"));
}

TEST_CASE("forward shapes and finiteness") {
    for (auto kind : kAllKinds) {
        CAPTURE(to_string(kind));
        Detector d(spec_of(kind));
        auto [logits, feats] = d.forward(testing::constant_image(32, 32, 3, 0.0));
        CHECK(logits.shape() == Shape{2});
        CHECK(feats.shape() == Shape{d.spec().feature_dim()});
        CHECK(logits.all_finite());
        CHECK(feats.all_finite());
        CHECK_THROWS(d.forward(testing::constant_image(16, 16, 3, 0.5)));
        CHECK_THROWS(d.require_trained("evaluation"));
    }
}

TEST_CASE("input gradient of cross-entropy matches central differences") {
    std::mt19937_64 rng(2);
    for (auto kind : kAllKinds) {
        CAPTURE(to_string(kind));
        Detector d(spec_of(kind, 3));
        for (int i = 0; i < 5; ++i) {
            Tensor x = uniform(rng, {1, 32, 32, 3}, 0.1, 0.9);
            int label = i % 2;
            auto r = testing::check_gradients(
                [&](auto& v) { return ad::softmax_cross_entropy(d.forward(v[0]).logits, {label}); }, {x}, rng, 24);
            CHECK(r.rel_error < 1e-4);
        }
    }
}

TEST_CASE("dct2 examples and properties") {
    Tensor c({8, 6}, 0.7);
    Tensor k = dct2(c);
    CHECK(k.at({0, 0}) == doctest::Approx(0.7 * std::sqrt(48.0)).epsilon(1e-12));
    for (std::size_t i = 1; i < k.size(); ++i) CHECK(std::abs(k[i]) < 1e-12);

    std::mt19937_64 rng(4);
    for (int i = 0; i < 10; ++i) {
        Tensor x = uniform(rng, {32, 32}, -1, 1);
        Tensor y = dct2(x);
        CHECK(max_abs_diff(idct2(y), x) < 1e-9);
        double nx = 0, ny = 0;
        for (double v : x.data()) nx += v * v;
        for (double v : y.data()) ny += v * v;
        CHECK(std::abs(std::sqrt(nx) - std::sqrt(ny)) < 1e-9);
    }
}

TEST_CASE("dft magnitude of a constant sits at the shifted centre") {
    Tensor m = dft_magnitude(Tensor({8, 8}, 0.5));
    CHECK(m.at({4, 4}) == doctest::Approx(32.0));
    CHECK(m.sum() == doctest::Approx(32.0));
    CHECK(dft_frequency(1, 8) == doctest::Approx(0.125));
    CHECK(dft_frequency(7, 8) == doctest::Approx(-0.125));
}

TEST_CASE("training reaches full accuracy on separable toy images") {
    std::mt19937_64 rng(5);
    std::vector<Image> reals, fakes;
    for (int i = 0; i < 40; ++i) {
        reals.emplace_back(uniform(rng, {32, 32, 3}, 0.1, 0.4), Provenance::real);
        fakes.emplace_back(uniform(rng, {32, 32, 3}, 0.6, 0.9), Provenance::fake);
    }
    auto data = LabeledImages::from(reals, fakes);
    for (auto kind : kAllKinds) {
        CAPTURE(to_string(kind));
        Detector d(spec_of(kind, 7));
        TrainConfig tc;
        tc.epochs = 20;
        tc.lr = 0.05;
        tc.batch = 16;
        tc.seed = 7;
        auto report = train(d, data, tc);
        CHECK(report.train_accuracy == 1.0);
        CHECK(d.trained());
        CHECK(report.epoch_loss.size() == 20);
    }
}

TEST_CASE("training rejects bad inputs") {
    std::vector<Image> reals{testing::constant_image(32, 32, 3, 0.2), testing::constant_image(32, 32, 3, 0.3)};
    Detector d(spec_of(DetectorKind::spatial_cnn));
    TrainConfig tc;
    CHECK_THROWS(train(d, LabeledImages::from(reals, {}), tc));
    tc.batch = 1;
    auto data = LabeledImages::from(reals, {testing::constant_image(32, 32, 3, 0.8)});
    CHECK_THROWS(train(d, data, tc));
}

TEST_CASE("training is deterministic and seeds matter") {
    auto corpus = generate_corpus(testing::small_corpus(40, 32, 9));
    auto data = LabeledImages::from(corpus.reals, corpus.fakes);
    TrainConfig tc;
    tc.epochs = 3;
    tc.seed = 2;
    Detector a(spec_of(DetectorKind::spatial_cnn, 4)), b(spec_of(DetectorKind::spatial_cnn, 4)),
        c(spec_of(DetectorKind::spatial_cnn, 5));
    train(a, data, tc);
    train(b, data, tc);
    train(c, data, tc);
    CHECK(a.weights() == b.weights());
    CHECK(a.weights() != c.weights());
}

TEST_CASE("seed-varied detectors on the synthetic corpus") {
    const auto& w = testing::small_world();
    auto labels = [](const Corpus& c) {
        std::vector<int> l(c.reals.size(), kRealLabel);
        l.resize(c.reals.size() + c.fakes.size(), kFakeLabel);
        return l;
    };
    std::vector<Image> all = w.attack.reals;
    all.insert(all.end(), w.attack.fakes.begin(), w.attack.fakes.end());
    CHECK(accuracy(w.detector, all, labels(w.attack)) >= 0.95);

    DetectorSpec s = w.detector.spec();
    s.seed = 6;
    Detector other(s);
    TrainConfig tc;
    tc.epochs = 12;
    tc.lr = 0.05;
    tc.batch = 16;
    tc.seed = 6;
    train(other, LabeledImages::from(w.train.reals, w.train.fakes), tc);
    CHECK(other.weights() != w.detector.weights());
    CHECK(accuracy(other, all, labels(w.attack)) >= 0.95);

    Tensor f = w.detector.features(all);
    CHECK(f.all_finite());
}

TEST_CASE("checkpoints round trip") {
    const auto& w = testing::small_world();
    auto dir = testing::scratch_dir("ckpt");
    w.detector.save(dir / "d");
    Detector back = Detector::load(dir / "d");
    CHECK(back.weights() == w.detector.weights());
    CHECK(back.trained());
    CHECK(back.spec().kind == w.detector.spec().kind);
    CHECK(back.logits(w.attack.fakes) == w.detector.logits(w.attack.fakes));
    CHECK_THROWS(Detector::load(dir / "missing"));
}
