#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "statconsist/autograd.hpp"
#include "statconsist/image.hpp"

namespace statconsist {

enum class DetectorKind { spatial_cnn, dct_freq, fft_freq };

std::string to_string(DetectorKind k);
DetectorKind parse_detector_kind(const std::string& s);

struct DetectorSpec {
    DetectorKind kind = DetectorKind::spatial_cnn;
    std::vector<std::size_t> conv_channels{8, 16, 32};  // spatial_cnn only
    std::size_t input_size = 64;
    std::size_t hidden = 32;  // dense width of the frequency heads
    std::uint64_t seed = 0;

    void validate() const;
    std::size_t feature_dim() const;
};

using WeightMap = std::map<std::string, Tensor>;
using WeightVars = std::map<std::string, ad::Var>;

/**
 * Small victim classifier. Logit 0 is "real", logit 1 is "fake".
 *
 * spatial_cnn: conv3x3(stride 2) + ReLU blocks, global average pool (features),
 * linear head. dct_freq / fft_freq: channel mean, 2-D DCT or shifted DFT
 * magnitude, log(1 + |.|), standardization, dense + ReLU (features), linear head.
 */
class Detector {
public:
    explicit Detector(DetectorSpec spec);

    struct Output {
        ad::Var logits;    // [N,2]
        ad::Var features;  // [N,F]
    };

    // x is [N,H,W,C]. Weights enter the graph as constants unless `w` is given.
    Output forward(const ad::Var& x) const;
    Output forward(const ad::Var& x, const WeightVars& w) const;

    // Single image: logits [2], features [F].
    std::pair<Tensor, Tensor> forward(const Image& x) const;

    Tensor logits(const std::vector<Image>& images, std::size_t chunk = 64) const;
    Tensor features(const std::vector<Image>& images, std::size_t chunk = 64) const;
    std::vector<int> predict(const std::vector<Image>& images) const;

    const DetectorSpec& spec() const { return spec_; }
    const WeightMap& weights() const { return weights_; }
    WeightMap& weights() { return weights_; }
    WeightVars weight_leaves() const;

    // Names of weights updated by gradient descent (excludes input statistics).
    std::vector<std::string> trainable() const;

    bool trained() const { return trained_; }
    void set_trained(bool t) { trained_ = t; }
    // Throws if the detector has not been trained.
    void require_trained(const char* what) const;

    void save(const std::filesystem::path& dir) const;
    static Detector load(const std::filesystem::path& dir);

private:
    Output forward_impl(const ad::Var& x, const WeightVars& w) const;

    DetectorSpec spec_;
    WeightMap weights_;
    bool trained_ = false;
};

// Log-magnitude spectrum fed to a frequency head, [N, H*W]. Used to fit the
// standardization statistics before training.
Tensor frequency_inputs(const Detector& d, const std::vector<Image>& images);

struct LabeledImages {
    std::vector<Image> images;
    std::vector<int> labels;

    static LabeledImages from(const std::vector<Image>& reals, const std::vector<Image>& fakes);
};

struct TrainConfig {
    std::size_t epochs = 12;
    double lr = 0.01;
    double momentum = 0.9;
    std::size_t batch = 32;
    double holdout_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct TrainReport {
    std::vector<double> epoch_loss;
    double train_accuracy = 0.0;
    double heldout_accuracy = 0.0;
    std::size_t train_count = 0;
    std::size_t heldout_count = 0;
    double seconds = 0.0;  // wall time, not reproducible
};

// Minibatch SGD with momentum on softmax cross-entropy. The held-out split is
// drawn from `data` with the config seed.
TrainReport train(Detector& d, const LabeledImages& data, const TrainConfig& cfg);

double accuracy(const Detector& d, const std::vector<Image>& images, const std::vector<int>& labels);

}  // namespace statconsist
