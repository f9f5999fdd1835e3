#include "statconsist/attack.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "statconsist/evaluation.hpp"
#include "statconsist/mmd.hpp"
#include "statconsist/parallel.hpp"

namespace statconsist {

using nlohmann::json;

std::string to_string(SmoothnessSign s) { return s == SmoothnessSign::penalty ? "penalty" : "as_printed"; }

SmoothnessSign parse_smoothness_sign(const std::string& s) {
    if (s == "as_printed") return SmoothnessSign::as_printed;
    if (s == "penalty") return SmoothnessSign::penalty;
    throw std::invalid_argument("unknown smoothness sign '" + s + "' (expected as_printed or penalty)");
}

void AttackConfig::validate() const {
    if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
    if (layers < 1) throw std::invalid_argument("layers must be >= 1");
    if (batch < 1) throw std::invalid_argument("batch must be >= 1");
    if (kernel_size % 2 == 0) throw std::invalid_argument("kernel_size must be odd");
    if (degree < 0) throw std::invalid_argument("polynomial degree must be >= 0");
    if (!(sigma_init >= kSigmaMin && sigma_init <= kSigmaMax)) throw std::invalid_argument("sigma_init out of range");
    if (grid < 2) throw std::invalid_argument("offset grid must be at least 2x2");
    if (!patterns.any()) throw std::invalid_argument("at least one degradation pattern must be enabled");
    for (double s : {steps.a, steps.phi, steps.sigma, steps.noise, steps.weights}) {
        if (s < 0.0) throw std::invalid_argument("step sizes must be non-negative");
    }
}

LayerMixWeights LayerMixWeights::uniform(std::size_t layers) { return {Tensor({layers, 4}, 0.0)}; }

Tensor LayerMixWeights::effective() const { return ad::softmax(ad::Var::constant(raw)).value(); }

AttackAborted::AttackAborted(const std::string& what, Trace t) : std::runtime_error(what), trace(std::move(t)) {}

namespace {

using ad::Var;

double sign_of(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

void sign_step(Tensor& t, const Tensor& g, double alpha) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] -= alpha * sign_of(g[i]);
}

struct LayerVars {
    Var a, phi, sigma, noise;
};

LayerVars make_vars(const AttackParams& p, const PatternMask& m, bool trainable) {
    auto mk = [trainable](const Tensor& t, bool on) { return trainable && on ? Var::leaf(t) : Var::constant(t); };
    return {mk(p.exposure.a, m.exposure), mk(p.exposure.phi, m.exposure), mk(p.blur.sigma_map, m.blur),
            mk(p.noise.noise_map, m.noise)};
}

struct Forward {
    Var out;
    Var smooth;
};

Forward forward_layers(const Var& x, const std::vector<LayerVars>& vars, const Var& raw_weights, bool mixed,
                       const AttackConfig& cfg) {
    const PatternMask& m = cfg.patterns;
    Var smooth = Var::constant(0.0);
    if (m.exposure) {
        for (const auto& v : vars) {
            smooth = smooth + ad::exposure_smoothness(v.a, v.phi, cfg.lambda_a, cfg.lambda_phi);
        }
    }
    auto expo = [&](const Var& in, const LayerVars& v) {
        return m.exposure ? ad::apply_exposure(in, v.a, v.phi, cfg.degree) : in;
    };
    auto blur = [&](const Var& in, const LayerVars& v) {
        return m.blur ? ad::apply_blur(in, v.sigma, cfg.kernel_size) : in;
    };
    auto noise = [&](const Var& in, const LayerVars& v) { return m.noise ? ad::apply_noise(in, v.noise) : in; };

    if (!mixed) {
        return {noise(blur(expo(x, vars[0]), vars[0]), vars[0]), smooth};
    }
    Var eff = ad::softmax(raw_weights);
    Var cur = x;
    for (std::size_t k = 0; k < vars.size(); ++k) {
        const auto& v = vars[k];
        auto w = [&](std::size_t j) { return ad::element(eff, k * 4 + j); };
        cur = w(0) * expo(cur, v) + w(1) * blur(cur, v) + w(2) * noise(cur, v) + w(3) * cur;
    }
    return {cur, smooth};
}

void project(AttackParams& p) {
    p.exposure.clamp_offsets();
    p.blur.clamp_sigma();
    p.noise.project();
}

struct BatchOutcome {
    BatchParams params;
    Trace trace;
    std::vector<Image> advs;
};

BatchOutcome run_batch(const std::vector<Image>& fakes, std::size_t first, std::size_t count, const Tensor& real_feats,
                       const Detector& detector, const AttackConfig& cfg, bool mixed, std::size_t batch_index,
                       const IterationObserver& observer) {
    std::vector<Image> imgs(fakes.begin() + static_cast<std::ptrdiff_t>(first),
                            fakes.begin() + static_cast<std::ptrdiff_t>(first + count));
    Tensor x = stack(imgs);
    std::size_t h = x.dim(1), w = x.dim(2), c = x.dim(3);

    FeatureBatch reals{real_feats, Provenance::real};
    FeatureBatch base{detector.features(imgs), Provenance::fake};
    std::vector<double> bw = bandwidth_ladder(median_heuristic(base, reals));

    BatchOutcome out;
    BatchParams& bp = out.params;
    bp.first_image = first;
    bp.image_count = count;
    std::size_t nl = mixed ? cfg.layers : 1;
    for (std::size_t k = 0; k < nl; ++k) {
        AttackParams p = AttackParams::identity(h, w, c, cfg.degree, cfg.grid, cfg.kernel_size, cfg.epsilon);
        p.exposure.lambda_a = cfg.lambda_a;
        p.exposure.lambda_phi = cfg.lambda_phi;
        for (double& v : p.blur.sigma_map.data()) v = cfg.sigma_init;
        bp.layers.push_back(std::move(p));
    }
    bp.weights = mixed ? LayerMixWeights::uniform(nl) : LayerMixWeights{Tensor()};

    Var xv = Var::constant(x);
    Var rv = Var::constant(real_feats);
    for (std::size_t it = 0;; ++it) {
        bool last = it == cfg.iterations;
        std::vector<LayerVars> vars;
        for (const auto& p : bp.layers) vars.push_back(make_vars(p, cfg.patterns, !last));
        Var raw = mixed && !last ? Var::leaf(bp.weights.raw) : Var::constant(bp.weights.raw);

        Forward f;
        Var loss, mmd;
        try {
            f = forward_layers(xv, vars, raw, mixed, cfg);
            mmd = ad::mmd2(detector.forward(f.out).features, rv, bw);
            loss = cfg.smoothness_sign == SmoothnessSign::penalty ? mmd - f.smooth : mmd + f.smooth;
        } catch (const NumericError& e) {
            throw AttackAborted(std::string("attack diverged at iteration ") + std::to_string(it) + ": " + e.what(),
                                out.trace);
        }
        out.trace.push_back({it, loss.value().item(), mmd.value().item(), f.smooth.value().item()});
        if (last) {
            out.advs = unstack(f.out.value(), Provenance::adversarial);
            break;
        }

        ad::backward(loss);
        for (std::size_t k = 0; k < nl; ++k) {
            AttackParams& p = bp.layers[k];
            const LayerVars& v = vars[k];
            if (cfg.patterns.exposure) {
                sign_step(p.exposure.a, v.a.grad(), cfg.steps.a);
                sign_step(p.exposure.phi, v.phi.grad(), cfg.steps.phi);
            }
            if (cfg.patterns.blur) sign_step(p.blur.sigma_map, v.sigma.grad(), cfg.steps.sigma);
            if (cfg.patterns.noise) sign_step(p.noise.noise_map, v.noise.grad(), cfg.steps.noise);
            project(p);
        }
        if (mixed) sign_step(bp.weights.raw, raw.grad(), cfg.steps.weights);
        if (observer) observer(batch_index, it, bp);
    }
    return out;
}

AttackResult run_attack(const std::vector<Image>& fakes, const std::vector<Image>& reals, const Detector& detector,
                        const AttackConfig& cfg, bool mixed, const IterationObserver& observer) {
    cfg.validate();
    if (fakes.empty()) throw std::invalid_argument("attack needs at least one fake image");
    if (reals.empty()) throw std::invalid_argument("attack needs at least one real image");
    detector.require_trained("attack");
    Tensor real_feats = detector.features(reals);

    std::size_t bs = cfg.per_image ? 1 : cfg.batch;
    std::size_t nb = (fakes.size() + bs - 1) / bs;
    std::vector<BatchOutcome> outcomes(nb);
    parallel_for(nb, cfg.threads, [&](std::size_t b) {
        std::size_t first = b * bs;
        std::size_t count = std::min(bs, fakes.size() - first);
        outcomes[b] = run_batch(fakes, first, count, real_feats, detector, cfg, mixed, b, observer);
    });

    AttackResult r;
    r.smoothness_sign = cfg.smoothness_sign;
    r.trace.resize(cfg.iterations + 1);
    for (std::size_t it = 0; it <= cfg.iterations; ++it) r.trace[it].iter = it;
    for (auto& o : outcomes) {
        for (std::size_t it = 0; it <= cfg.iterations; ++it) {
            r.trace[it].loss += o.trace[it].loss / static_cast<double>(nb);
            r.trace[it].mmd2 += o.trace[it].mmd2 / static_cast<double>(nb);
            r.trace[it].smooth_term += o.trace[it].smooth_term / static_cast<double>(nb);
        }
        for (auto& img : o.advs) r.advs.push_back(std::move(img));
        r.params.push_back(std::move(o.params));
    }
    return r;
}

}  // namespace

AttackResult stat_attack(const std::vector<Image>& fakes, const std::vector<Image>& reals, const Detector& detector,
                         const AttackConfig& cfg, const IterationObserver& observer) {
    if (cfg.layers != 1) throw std::invalid_argument("stat_attack requires layers == 1");
    return run_attack(fakes, reals, detector, cfg, false, observer);
}

AttackResult mstat_attack(const std::vector<Image>& fakes, const std::vector<Image>& reals,
                          const Detector& detector, const AttackConfig& cfg, const IterationObserver& observer) {
    if (cfg.layers < 2) throw std::invalid_argument("mstat_attack requires layers >= 2");
    return run_attack(fakes, reals, detector, cfg, true, observer);
}

std::vector<Image> apply_batch_params(const std::vector<Image>& fakes, const BatchParams& p, const AttackConfig& cfg) {
    if (p.first_image + p.image_count > fakes.size()) throw std::invalid_argument("batch parameters exceed image list");
    std::vector<Image> imgs(fakes.begin() + static_cast<std::ptrdiff_t>(p.first_image),
                            fakes.begin() + static_cast<std::ptrdiff_t>(p.first_image + p.image_count));
    std::vector<LayerVars> vars;
    for (const auto& l : p.layers) vars.push_back(make_vars(l, cfg.patterns, false));
    Forward f = forward_layers(Var::constant(stack(imgs)), vars, Var::constant(p.weights.raw), p.layers.size() > 1, cfg);
    return unstack(f.out.value(), Provenance::adversarial);
}

namespace {

// Gradient of the cross-entropy toward "real" with respect to the input batch.
Tensor real_ce_gradient(const Detector& d, const Tensor& x) {
    Var xv = Var::leaf(x);
    std::vector<int> labels(x.dim(0), kRealLabel);
    Var loss = ad::softmax_cross_entropy(d.forward(xv).logits, labels);
    ad::backward(loss);
    return xv.grad();
}

template <typename Step>
std::vector<Image> input_attack(const std::vector<Image>& fakes, const Detector& d, const AttackConfig& cfg,
                                Step step) {
    cfg.validate();
    d.require_trained("baseline attack");
    std::size_t nb = (fakes.size() + cfg.batch - 1) / cfg.batch;
    std::vector<std::vector<Image>> out(nb);
    parallel_for(nb, cfg.threads, [&](std::size_t b) {
        std::size_t first = b * cfg.batch;
        std::size_t count = std::min(cfg.batch, fakes.size() - first);
        std::vector<Image> imgs(fakes.begin() + static_cast<std::ptrdiff_t>(first),
                                fakes.begin() + static_cast<std::ptrdiff_t>(first + count));
        out[b] = unstack(step(stack(imgs), b), Provenance::adversarial);
    });
    std::vector<Image> advs;
    for (auto& v : out) {
        for (auto& img : v) advs.push_back(std::move(img));
    }
    return advs;
}

}  // namespace

std::vector<Image> pgd_baseline(const std::vector<Image>& fakes, const Detector& detector, const AttackConfig& cfg) {
    double eps = cfg.epsilon;
    double alpha = eps / 10.0;
    return input_attack(fakes, detector, cfg, [&](const Tensor& x0, std::size_t b) {
        std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + b);
        std::uniform_real_distribution<double> start(-eps, eps);
        Tensor x = x0;
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x0[i] + start(rng), 0.0, 1.0);
        for (std::size_t it = 0; it < cfg.iterations; ++it) {
            Tensor g = real_ce_gradient(detector, x);
            for (std::size_t i = 0; i < x.size(); ++i) {
                double v = x[i] - alpha * sign_of(g[i]);
                v = std::clamp(v, x0[i] - eps, x0[i] + eps);
                x[i] = std::clamp(v, 0.0, 1.0);
            }
        }
        return x;
    });
}

std::vector<Image> fgsm_baseline(const std::vector<Image>& fakes, const Detector& detector, const AttackConfig& cfg) {
    return input_attack(fakes, detector, cfg, [&](const Tensor& x0, std::size_t) {
        Tensor g = real_ce_gradient(detector, x0);
        Tensor x = x0;
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x0[i] - cfg.epsilon * sign_of(g[i]), 0.0, 1.0);
        return x;
    });
}

std::vector<std::pair<std::string, PatternMask>> ablation_patterns() {
    return {{"only_noise", {false, false, true}},   {"only_exposure", {true, false, false}},
            {"only_blur", {false, true, false}},    {"wo_noise", {true, true, false}},
            {"wo_exposure", {false, true, true}},   {"wo_blur", {true, false, true}}};
}

AblationTable ablation_single_pattern(const std::vector<Image>& fakes, const std::vector<Image>& reals,
                                      const Detector& source, const std::vector<NamedDetector>& targets,
                                      const AttackConfig& cfg) {
    AblationTable table;
    for (const auto& t : targets) table.targets.push_back(t.name);
    for (const auto& [name, mask] : ablation_patterns()) {
        AttackConfig c = cfg;
        c.layers = 1;
        c.patterns = mask;
        AblationRow row;
        row.pattern = name;
        row.mask = mask;
        row.result = stat_attack(fakes, reals, source, c);
        for (const auto& t : targets) {
            AsrCell cell = attack_success(*t.detector, fakes, row.result.advs);
            row.asr.push_back(cell.asr);
            row.denominators.push_back(cell.denominator);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

namespace {

json tensor_json(const Tensor& t) {
    return json{{"shape", t.shape()}, {"data", std::vector<double>(t.data().begin(), t.data().end())}};
}

}  // namespace

json params_to_json(const BatchParams& p) {
    json layers = json::array();
    for (const auto& l : p.layers) {
        layers.push_back({{"exposure",
                           {{"degree", l.exposure.degree},
                            {"lambda_a", l.exposure.lambda_a},
                            {"lambda_phi", l.exposure.lambda_phi},
                            {"a", tensor_json(l.exposure.a)},
                            {"phi", tensor_json(l.exposure.phi)}}},
                          {"blur", {{"kernel_size", l.blur.kernel_size}, {"sigma_map", tensor_json(l.blur.sigma_map)}}},
                          {"noise", {{"epsilon", l.noise.epsilon}, {"noise_map", tensor_json(l.noise.noise_map)}}}});
    }
    json j{{"first_image", p.first_image}, {"image_count", p.image_count}, {"layers", layers}};
    if (p.layers.size() > 1) {
        j["mix_weights"] = {{"raw", tensor_json(p.weights.raw)}, {"effective", tensor_json(p.weights.effective())}};
    }
    return j;
}

json params_to_json(const std::vector<BatchParams>& p) {
    json arr = json::array();
    for (const auto& b : p) arr.push_back(params_to_json(b));
    return arr;
}

}  // namespace statconsist
