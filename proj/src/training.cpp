#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "statconsist/detector.hpp"

namespace statconsist {

LabeledImages LabeledImages::from(const std::vector<Image>& reals, const std::vector<Image>& fakes) {
    LabeledImages d;
    d.images.reserve(reals.size() + fakes.size());
    for (const auto& r : reals) {
        d.images.push_back(r);
        d.labels.push_back(kRealLabel);
    }
    for (const auto& f : fakes) {
        d.images.push_back(f);
        d.labels.push_back(kFakeLabel);
    }
    return d;
}

double accuracy(const Detector& d, const std::vector<Image>& images, const std::vector<int>& labels) {
    if (images.empty()) return 0.0;
    auto pred = d.predict(images);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
    return static_cast<double>(hits) / static_cast<double>(images.size());
}

namespace {

// Per-coefficient standardization of the spectrum input, fitted on the training split.
void fit_input_statistics(Detector& d, const std::vector<Image>& images) {
    Tensor spec = frequency_inputs(d, images);
    std::size_t n = spec.dim(0), f = spec.dim(1);
    Tensor mean({f}), stddev({f});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < f; ++k) mean[k] += spec[i * f + k];
    }
    for (std::size_t k = 0; k < f; ++k) mean[k] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < f; ++k) stddev[k] += std::pow(spec[i * f + k] - mean[k], 2);
    }
    for (std::size_t k = 0; k < f; ++k) stddev[k] = std::max(std::sqrt(stddev[k] / static_cast<double>(n)), 1e-3);
    d.weights()["norm.mean"] = mean;
    d.weights()["norm.std"] = stddev;
}

}  // namespace

TrainReport train(Detector& d, const LabeledImages& data, const TrainConfig& cfg) {
    if (data.images.size() != data.labels.size()) throw std::invalid_argument("images and labels differ in length");
    if (cfg.batch < 2) throw std::invalid_argument("training batch must be >= 2");
    bool has_real = std::find(data.labels.begin(), data.labels.end(), kRealLabel) != data.labels.end();
    bool has_fake = std::find(data.labels.begin(), data.labels.end(), kFakeLabel) != data.labels.end();
    if (!has_real || !has_fake) throw std::invalid_argument("training data must contain both classes");

    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.images.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    auto held = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(order.size())));
    std::vector<std::size_t> train_idx(order.begin() + held, order.end());
    std::vector<std::size_t> held_idx(order.begin(), order.begin() + held);

    auto gather = [&data](const std::vector<std::size_t>& idx, std::vector<Image>& imgs, std::vector<int>& labels) {
        imgs.clear();
        labels.clear();
        for (auto i : idx) {
            imgs.push_back(data.images[i]);
            labels.push_back(data.labels[i]);
        }
    };
    std::vector<Image> train_imgs, held_imgs;
    std::vector<int> train_labels, held_labels;
    gather(train_idx, train_imgs, train_labels);
    gather(held_idx, held_imgs, held_labels);

    if (d.spec().kind != DetectorKind::spatial_cnn) fit_input_statistics(d, train_imgs);

    std::map<std::string, Tensor> velocity;
    for (const auto& name : d.trainable()) velocity[name] = Tensor::zeros_like(d.weights().at(name));

    TrainReport report;
    std::vector<std::size_t> perm(train_imgs.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(perm.begin(), perm.end(), rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < perm.size(); start += cfg.batch) {
            std::size_t end = std::min(perm.size(), start + cfg.batch);
            std::vector<Image> xb;
            std::vector<int> yb;
            for (std::size_t k = start; k < end; ++k) {
                xb.push_back(train_imgs[perm[k]]);
                yb.push_back(train_labels[perm[k]]);
            }
            WeightVars w = d.weight_leaves();
            auto out = d.forward(ad::Var::constant(stack(xb)), w);
            ad::Var loss = ad::softmax_cross_entropy(out.logits, yb);
            ad::backward(loss);
            loss_sum += loss.value().item();
            ++batches;
            for (const auto& name : d.trainable()) {
                Tensor g = w.at(name).grad();
                Tensor& v = velocity.at(name);
                Tensor& p = d.weights().at(name);
                for (std::size_t i = 0; i < p.size(); ++i) {
                    v[i] = cfg.momentum * v[i] - cfg.lr * g[i];
                    p[i] += v[i];
                }
                p.require_finite("sgd update");
            }
        }
        report.epoch_loss.push_back(loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1)));
    }
    d.set_trained(true);
    report.train_count = train_imgs.size();
    report.heldout_count = held_imgs.size();
    report.train_accuracy = accuracy(d, train_imgs, train_labels);
    report.heldout_accuracy = accuracy(d, held_imgs, held_labels);
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace statconsist
