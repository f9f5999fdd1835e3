#include "statconsist/detector.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "statconsist/tensor_io.hpp"
#include "statconsist/transforms.hpp"

namespace statconsist {

using nlohmann::json;

std::string to_string(DetectorKind k) {
    switch (k) {
        case DetectorKind::spatial_cnn: return "spatial_cnn";
        case DetectorKind::dct_freq: return "dct_freq";
        case DetectorKind::fft_freq: return "fft_freq";
    }
    return "unknown";
}

DetectorKind parse_detector_kind(const std::string& s) {
    if (s == "spatial_cnn") return DetectorKind::spatial_cnn;
    if (s == "dct_freq") return DetectorKind::dct_freq;
    if (s == "fft_freq") return DetectorKind::fft_freq;
    throw std::invalid_argument("unknown detector kind '" + s + "'");
}

void DetectorSpec::validate() const {
    if (input_size != 32 && input_size != 64 && input_size != 128) {
        throw std::invalid_argument("detector input_size must be 32, 64 or 128");
    }
    if (kind == DetectorKind::spatial_cnn) {
        if (conv_channels.empty()) throw std::invalid_argument("spatial_cnn needs at least one conv block");
        for (auto c : conv_channels) {
            if (c == 0) throw std::invalid_argument("conv block width must be positive");
        }
    } else if (hidden == 0) {
        throw std::invalid_argument("frequency head needs a positive hidden width");
    }
}

std::size_t DetectorSpec::feature_dim() const {
    return kind == DetectorKind::spatial_cnn ? conv_channels.back() : hidden;
}

namespace {

Tensor normal_init(std::mt19937_64& rng, Shape shape, double stddev) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : t.data()) v = dist(rng);
    return t;
}

}  // namespace

Detector::Detector(DetectorSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    std::mt19937_64 rng(spec_.seed);
    if (spec_.kind == DetectorKind::spatial_cnn) {
        std::size_t cin = 3;
        for (std::size_t i = 0; i < spec_.conv_channels.size(); ++i) {
            std::size_t cout = spec_.conv_channels[i];
            auto name = "conv" + std::to_string(i);
            weights_[name + ".w"] = normal_init(rng, {3, 3, cin, cout}, std::sqrt(2.0 / (9.0 * cin)));
            weights_[name + ".b"] = Tensor({cout});
            cin = cout;
        }
        weights_["head.w"] = normal_init(rng, {cin, 2}, std::sqrt(1.0 / cin));
        weights_["head.b"] = Tensor({2});
    } else {
        std::size_t in = spec_.input_size * spec_.input_size;
        weights_["norm.mean"] = Tensor({in});
        weights_["norm.std"] = Tensor({in}, 1.0);
        weights_["fc1.w"] = normal_init(rng, {in, spec_.hidden}, std::sqrt(2.0 / in));
        weights_["fc1.b"] = Tensor({spec_.hidden});
        weights_["head.w"] = normal_init(rng, {spec_.hidden, 2}, std::sqrt(1.0 / spec_.hidden));
        weights_["head.b"] = Tensor({2});
    }
}

std::vector<std::string> Detector::trainable() const {
    std::vector<std::string> names;
    for (const auto& [k, v] : weights_) {
        if (k.rfind("norm.", 0) != 0) names.push_back(k);
    }
    return names;
}

WeightVars Detector::weight_leaves() const {
    WeightVars w;
    for (const auto& [k, v] : weights_) {
        bool learn = k.rfind("norm.", 0) != 0;
        w.emplace(k, learn ? ad::Var::leaf(v) : ad::Var::constant(v));
    }
    return w;
}

void Detector::require_trained(const char* what) const {
    if (!trained_) throw std::logic_error(std::string(what) + " requires a trained detector");
}

Detector::Output Detector::forward(const ad::Var& x) const {
    WeightVars w;
    for (const auto& [k, v] : weights_) w.emplace(k, ad::Var::constant(v));
    return forward_impl(x, w);
}

Detector::Output Detector::forward(const ad::Var& x, const WeightVars& w) const { return forward_impl(x, w); }

namespace {

// log(1 + |spectrum|) of the channel-mean image, flattened to [N, H*W].
ad::Var log_spectrum(DetectorKind kind, const ad::Var& x) {
    using namespace ad;
    const auto& s = x.shape();
    Var gray = channel_mean(x);
    Var mag = kind == DetectorKind::dct_freq ? abs(statconsist::ad::dct2(gray)) : statconsist::ad::dft_magnitude(gray);
    Var logmag = log(mag + 1.0);
    return reshape(logmag, {s[0], s[1] * s[2]});
}

}  // namespace

Detector::Output Detector::forward_impl(const ad::Var& x, const WeightVars& w) const {
    using namespace ad;
    const auto& s = x.shape();
    if (s.size() != 4 || s[1] != spec_.input_size || s[2] != spec_.input_size || s[3] != 3) {
        throw ShapeError("detector expects [N," + std::to_string(spec_.input_size) + "," +
                         std::to_string(spec_.input_size) + ",3] input, got " + shape_str(s));
    }
    auto W = [&w](const std::string& k) -> const Var& {
        auto it = w.find(k);
        if (it == w.end()) throw std::invalid_argument("missing detector weight " + k);
        return it->second;
    };
    Var feats;
    if (spec_.kind == DetectorKind::spatial_cnn) {
        Var h = x - 0.5;
        for (std::size_t i = 0; i < spec_.conv_channels.size(); ++i) {
            auto name = "conv" + std::to_string(i);
            h = relu(conv2d(h, W(name + ".w"), 2, 1) + W(name + ".b"));
        }
        feats = global_avg_pool(h);
    } else {
        Var spec = log_spectrum(spec_.kind, x);
        Var z = (spec - W("norm.mean")) / W("norm.std");
        feats = relu(matmul(z, W("fc1.w")) + W("fc1.b"));
    }
    Var logits = matmul(feats, W("head.w")) + W("head.b");
    return {logits, feats};
}

std::pair<Tensor, Tensor> Detector::forward(const Image& x) const {
    Tensor batch = stack({x});
    auto out = forward(ad::Var::constant(batch));
    return {out.logits.value().reshaped({2}), out.features.value().reshaped({spec_.feature_dim()})};
}

namespace {

template <class F>
Tensor chunked(const std::vector<Image>& images, std::size_t chunk, std::size_t width, F fn) {
    Tensor out({images.size(), width});
    for (std::size_t start = 0; start < images.size(); start += chunk) {
        std::size_t end = std::min(images.size(), start + chunk);
        std::vector<Image> part(images.begin() + start, images.begin() + end);
        Tensor r = fn(ad::Var::constant(stack(part)));
        std::copy(r.data().begin(), r.data().end(), out.data().begin() + start * width);
    }
    return out;
}

}  // namespace

Tensor Detector::logits(const std::vector<Image>& images, std::size_t chunk) const {
    return chunked(images, chunk, 2, [this](const ad::Var& x) { return forward(x).logits.value(); });
}

Tensor Detector::features(const std::vector<Image>& images, std::size_t chunk) const {
    return chunked(images, chunk, spec_.feature_dim(), [this](const ad::Var& x) { return forward(x).features.value(); });
}

std::vector<int> Detector::predict(const std::vector<Image>& images) const {
    Tensor l = logits(images);
    std::vector<int> out(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) out[i] = l[2 * i + 1] > l[2 * i] ? kFakeLabel : kRealLabel;
    return out;
}

void Detector::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    json j;
    j["schema_version"] = 1;
    j["kind"] = to_string(spec_.kind);
    j["conv_channels"] = spec_.conv_channels;
    j["input_size"] = spec_.input_size;
    j["hidden"] = spec_.hidden;
    j["seed"] = spec_.seed;
    j["trained"] = trained_;
    std::vector<std::string> names;
    for (const auto& [k, v] : weights_) {
        save_tensor(dir / (k + ".stns"), v);
        names.push_back(k);
    }
    j["weights"] = names;
    std::ofstream os(dir / "spec.json");
    if (!os) throw std::runtime_error("cannot write " + (dir / "spec.json").string());
    os << j.dump(2) << '\n';
}

Detector Detector::load(const std::filesystem::path& dir) {
    std::ifstream is(dir / "spec.json");
    if (!is) throw std::runtime_error("no detector checkpoint at " + dir.string());
    json j = json::parse(is);
    DetectorSpec spec;
    spec.kind = parse_detector_kind(j.at("kind").get<std::string>());
    spec.conv_channels = j.at("conv_channels").get<std::vector<std::size_t>>();
    spec.input_size = j.at("input_size").get<std::size_t>();
    spec.hidden = j.at("hidden").get<std::size_t>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    Detector d(spec);
    for (const auto& name : j.at("weights").get<std::vector<std::string>>()) {
        auto it = d.weights_.find(name);
        if (it == d.weights_.end()) throw std::runtime_error("unexpected weight '" + name + "' in checkpoint");
        Tensor t = load_tensor(dir / (name + ".stns"));
        if (t.shape() != it->second.shape()) throw std::runtime_error("weight '" + name + "' has wrong shape");
        it->second = std::move(t);
    }
    d.trained_ = j.at("trained").get<bool>();
    return d;
}

Tensor frequency_inputs(const Detector& d, const std::vector<Image>& images) {
    if (d.spec().kind == DetectorKind::spatial_cnn) throw std::invalid_argument("spatial detectors have no spectrum input");
    std::size_t width = d.spec().input_size * d.spec().input_size;
    return chunked(images, 64, width, [&d](const ad::Var& x) { return log_spectrum(d.spec().kind, x).value(); });
}

}  // namespace statconsist
