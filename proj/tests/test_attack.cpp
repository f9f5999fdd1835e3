#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "statconsist/attack.hpp"
#include "statconsist/evaluation.hpp"
#include "support.hpp"

using namespace statconsist;

namespace {

AttackConfig quick_config(std::size_t iterations = 6) {
    AttackConfig c;
    c.iterations = iterations;
    c.batch = 6;
    c.layers = 1;
    c.smoothness_sign = SmoothnessSign::penalty;
    return c;
}

double max_image_diff(const std::vector<Image>& a, const std::vector<Image>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, max_abs_diff(a[i].pixels, b[i].pixels));
    return m;
}

// Every coordinate that did not end on a clamp boundary moved by 0 or exactly alpha.
void check_sign_steps(const Tensor& before, const Tensor& after, double alpha, double lo, double hi) {
    for (std::size_t i = 0; i < after.size(); ++i) {
        if (after[i] == lo || after[i] == hi) continue;
        double d = std::abs(after[i] - before[i]);
        bool ok = d == 0.0 || std::abs(d - alpha) <= 1e-12 * std::max(1.0, alpha);
        REQUIRE(ok);
    }
}

}  // namespace

TEST_CASE("smoothness sign parsing") {
    CHECK(parse_smoothness_sign("penalty") == SmoothnessSign::penalty);
    CHECK(parse_smoothness_sign("as_printed") == SmoothnessSign::as_printed);
    CHECK(to_string(SmoothnessSign::penalty) == "penalty");
    CHECK_THROWS(parse_smoothness_sign("maximize"));
    AttackConfig d;
    CHECK(d.iterations == 40);
    CHECK(d.epsilon == 8.0 / 255.0);
    CHECK(d.layers == 3);
    CHECK(d.batch == 30);
    CHECK(d.steps.a == 1e-2);
    CHECK(d.steps.phi == 1e-3);
    CHECK(d.smoothness_sign == SmoothnessSign::as_printed);
}

TEST_CASE("layer count must match the attack variant") {
    const auto& w = testing::small_world();
    auto c = quick_config(1);
    c.layers = 2;
    CHECK_THROWS(stat_attack(w.attack.fakes, w.attack.reals, w.detector, c));
    c.layers = 1;
    CHECK_THROWS(mstat_attack(w.attack.fakes, w.attack.reals, w.detector, c));
    CHECK_THROWS(stat_attack({}, w.attack.reals, w.detector, c));
    c.patterns = {false, false, false};
    CHECK_THROWS(stat_attack(w.attack.fakes, w.attack.reals, w.detector, c));
}

TEST_CASE("zero iterations returns the inputs") {
    const auto& w = testing::small_world();
    auto c = quick_config(0);
    auto r = stat_attack(w.attack.fakes, w.attack.reals, w.detector, c);
    CHECK(r.advs.size() == w.attack.fakes.size());
    CHECK(max_image_diff(r.advs, w.attack.fakes) < 1e-5);
    CHECK(r.trace.size() == 1);
    for (const auto& img : r.advs) CHECK(img.label == Provenance::adversarial);

    c.layers = 3;
    auto m = mstat_attack(w.attack.fakes, w.attack.reals, w.detector, c);
    CHECK(max_image_diff(m.advs, w.attack.fakes) < 1e-5);
}

TEST_CASE("stat attack descends and respects every constraint") {
    const auto& w = testing::small_world();
    auto c = quick_config(12);
    std::vector<BatchParams> prev;
    for (std::size_t b = 0; b < 2; ++b) {
        BatchParams p;
        p.layers.push_back(AttackParams::identity(32, 32, 3));
        for (double& v : p.layers[0].blur.sigma_map.data()) v = c.sigma_init;
        prev.push_back(p);
    }
    std::size_t calls = 0;
    auto observer = [&](std::size_t b, std::size_t, const BatchParams& p) {
        ++calls;
        const AttackParams& now = p.layers[0];
        const AttackParams& was = prev[b].layers[0];
        REQUIRE(now.noise.noise_map.max_abs() <= c.epsilon);
        check_sign_steps(was.exposure.a, now.exposure.a, c.steps.a, -1e300, 1e300);
        double lim = 0.5 * now.exposure.cell_width();
        check_sign_steps(was.exposure.phi, now.exposure.phi, c.steps.phi, -lim, lim);
        check_sign_steps(was.blur.sigma_map, now.blur.sigma_map, c.steps.sigma, kSigmaMin, kSigmaMax);
        check_sign_steps(was.noise.noise_map, now.noise.noise_map, c.steps.noise, -c.epsilon, c.epsilon);
        prev[b] = p;
    };
    auto r = stat_attack(w.attack.fakes, w.attack.reals, w.detector, c, observer);
    CHECK(calls == 2 * c.iterations);
    REQUIRE(r.trace.size() == c.iterations + 1);
    CHECK(r.trace.back().loss < r.trace.front().loss);
    CHECK(r.params.size() == 2);
    for (const auto& p : r.params) CHECK(p.layers[0].noise.noise_map.max_abs() <= c.epsilon);
    for (const auto& row : r.trace)
        CHECK(row.loss == doctest::Approx(row.mmd2 - row.smooth_term).epsilon(1e-12));

    auto again = apply_batch_params(w.attack.fakes, r.params[1], c);
    for (std::size_t i = 0; i < again.size(); ++i) CHECK(again[i].pixels == r.advs[6 + i].pixels);
}

TEST_CASE("as printed mode adds the smoothness term") {
    const auto& w = testing::small_world();
    auto c = quick_config(3);
    c.smoothness_sign = SmoothnessSign::as_printed;
    auto r = stat_attack(w.attack.fakes, w.attack.reals, w.detector, c);
    CHECK(r.smoothness_sign == SmoothnessSign::as_printed);
    for (const auto& row : r.trace) CHECK(row.loss == doctest::Approx(row.mmd2 + row.smooth_term).epsilon(1e-12));
}

TEST_CASE("mixing weights stay on the simplex") {
    CHECK(LayerMixWeights::uniform(3).effective() == Tensor({3, 4}, 0.25));

    const auto& w = testing::small_world();
    auto c = quick_config(6);
    c.layers = 3;
    std::size_t calls = 0;
    auto r = mstat_attack(w.attack.fakes, w.attack.reals, w.detector, c,
                          [&](std::size_t, std::size_t, const BatchParams& p) {
                              ++calls;
                              REQUIRE(p.layers.size() == 3);
                              Tensor e = p.weights.effective();
                              for (std::size_t k = 0; k < 3; ++k) {
                                  double s = 0;
                                  for (std::size_t j = 0; j < 4; ++j) {
                                      REQUIRE(e.at({k, j}) > 0.0);
                                      s += e.at({k, j});
                                  }
                                  REQUIRE(std::abs(s - 1.0) <= 1e-12);
                                  REQUIRE(p.layers[k].noise.noise_map.max_abs() <= c.epsilon);
                              }
                          });
    CHECK(calls == 2 * c.iterations);
    CHECK(r.params[0].weights.raw != Tensor({3, 4}, 0.0));
    CHECK(r.params[0].layers[0].exposure.a != r.params[0].layers[1].exposure.a);
    for (const auto& img : r.advs)
        for (double v : img.pixels.data()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
}

TEST_CASE("a pass-through layer leaves its input untouched") {
    const auto& w = testing::small_world();
    std::mt19937_64 rng(3);
    auto c = quick_config();
    c.layers = 2;
    BatchParams p;
    p.image_count = 4;
    for (int k = 0; k < 2; ++k) {
        auto layer = AttackParams::identity(32, 32, 3);
        layer.exposure.a = testing::uniform(rng, {78}, -0.05, 0.05);
        layer.blur.sigma_map = testing::uniform(rng, {32, 32}, 0.5, 2.0);
        layer.noise.noise_map = testing::uniform(rng, {32, 32, 3}, -c.epsilon, c.epsilon);
        p.layers.push_back(layer);
    }
    p.weights.raw = Tensor({2, 4}, std::vector<double>{-1000, -1000, -1000, 0, -1000, -1000, -1000, 0});
    CHECK(p.weights.effective().at({0, 3}) == 1.0);
    auto out = apply_batch_params(w.attack.fakes, p, c);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].pixels == w.attack.fakes[i].pixels);

    p.weights.raw = testing::uniform(rng, {2, 4}, -2, 2);
    auto one = p;
    one.weights.raw.at({1, 0}) = one.weights.raw.at({1, 1}) = one.weights.raw.at({1, 2}) = -1000;
    one.weights.raw.at({1, 3}) = 0;
    auto first_only = p;
    first_only.layers.resize(1);
    first_only.weights.raw = Tensor({1, 4}, std::vector<double>(p.weights.raw.data().begin(),
                                                                p.weights.raw.data().begin() + 4));
    auto a = apply_batch_params(w.attack.fakes, one, c);
    // The remaining mixed layer evaluated by hand.
    Tensor eff = first_only.weights.effective();
    const auto& l = p.layers[0];
    for (std::size_t i = 0; i < 4; ++i) {
        const Image& x = w.attack.fakes[i];
        Image e = apply_exposure(x, l.exposure), b = apply_blur(x, l.blur), n = apply_noise(x, l.noise);
        Tensor mix = x.pixels;
        for (std::size_t j = 0; j < mix.size(); ++j)
            mix[j] = eff[0] * e.pixels[j] + eff[1] * b.pixels[j] + eff[2] * n.pixels[j] + eff[3] * x.pixels[j];
        CHECK(max_abs_diff(a[i].pixels, mix) < 1e-12);
    }
}

TEST_CASE("attacks are reproducible across runs and thread counts") {
    const auto& w = testing::small_world();
    auto c = quick_config(4);
    auto a = stat_attack(w.attack.fakes, w.attack.reals, w.detector, c);
    c.threads = 2;
    auto b = stat_attack(w.attack.fakes, w.attack.reals, w.detector, c);
    for (std::size_t i = 0; i < a.advs.size(); ++i) CHECK(a.advs[i].pixels == b.advs[i].pixels);
    CHECK(params_to_json(a.params) == params_to_json(b.params));

    c.seed = 4;
    auto p1 = pgd_baseline(w.attack.fakes, w.detector, c);
    auto p2 = pgd_baseline(w.attack.fakes, w.detector, c);
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i].pixels == p2[i].pixels);
}

TEST_CASE("per-image mode fits one parameter set per image") {
    const auto& w = testing::small_world();
    auto c = quick_config(2);
    c.per_image = true;
    std::vector<Image> few(w.attack.fakes.begin(), w.attack.fakes.begin() + 3);
    auto r = stat_attack(few, w.attack.reals, w.detector, c);
    CHECK(r.params.size() == 3);
    CHECK(r.advs.size() == 3);
}

TEST_CASE("FGSM moves unclamped pixels by exactly epsilon") {
    const auto& w = testing::small_world();
    auto c = quick_config();
    auto advs = fgsm_baseline(w.attack.fakes, w.detector, c);
    std::size_t moved = 0;
    for (std::size_t i = 0; i < advs.size(); ++i) {
        const Tensor& x = w.attack.fakes[i].pixels;
        const Tensor& y = advs[i].pixels;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (y[j] == 0.0 || y[j] == 1.0) continue;
            bool ok = y[j] == x[j] + c.epsilon || y[j] == x[j] - c.epsilon;
            REQUIRE(ok);
            ++moved;
        }
    }
    CHECK(moved > 0);
}

TEST_CASE("PGD stays inside the epsilon ball") {
    const auto& w = testing::small_world();
    auto c = quick_config(10);
    auto advs = pgd_baseline(w.attack.fakes, w.detector, c);
    for (std::size_t i = 0; i < advs.size(); ++i) {
        const Tensor& x = w.attack.fakes[i].pixels;
        const Tensor& y = advs[i].pixels;
        for (std::size_t j = 0; j < x.size(); ++j) {
            REQUIRE(y[j] <= x[j] + c.epsilon);
            REQUIRE(y[j] >= x[j] - c.epsilon);
            REQUIRE(y[j] >= 0.0);
            REQUIRE(y[j] <= 1.0);
        }
    }
    auto asr = attack_success(w.detector, w.attack.fakes, advs);
    CHECK(asr.denominator > 0);
}

TEST_CASE("ablation freezes disabled patterns") {
    const auto& w = testing::small_world();
    auto c = quick_config(4);
    std::vector<NamedDetector> targets{{"source", &w.detector}};
    auto table = ablation_single_pattern(w.attack.fakes, w.attack.reals, w.detector, targets, c);
    REQUIRE(table.rows.size() == 6);
    CHECK(table.targets == std::vector<std::string>{"source"});
    for (const auto& row : table.rows) {
        CAPTURE(row.pattern);
        REQUIRE(row.asr.size() == 1);
        CHECK(row.asr[0] >= 0.0);
        CHECK(row.asr[0] <= 1.0);
        for (const auto& bp : row.result.params) {
            const auto& p = bp.layers[0];
            if (!row.mask.exposure) {
                CHECK(p.exposure.a.max_abs() == 0.0);
                CHECK(p.exposure.phi.max_abs() == 0.0);
            }
            if (!row.mask.noise) CHECK(p.noise.noise_map.max_abs() == 0.0);
            if (!row.mask.blur) {
                for (double v : p.blur.sigma_map.data()) CHECK(v == c.sigma_init);
            }
        }
    }
    CHECK(table.rows[2].pattern == "only_blur");
    CHECK(table.rows[3].pattern == "wo_noise");
}

TEST_CASE("parameters serialize to JSON") {
    const auto& w = testing::small_world();
    auto c = quick_config(1);
    c.layers = 2;
    auto r = mstat_attack(w.attack.fakes, w.attack.reals, w.detector, c);
    nlohmann::json j = params_to_json(r.params);
    REQUIRE(j.is_array());
    CHECK(j.size() == 2);
    CHECK(j.dump().find("noise") != std::string::npos);
}
