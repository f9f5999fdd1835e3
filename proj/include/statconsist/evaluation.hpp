#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "statconsist/attack.hpp"
#include "statconsist/detector.hpp"
#include "statconsist/image.hpp"
#include "statconsist/mmd.hpp"
#include "statconsist/statx.hpp"
#include "statconsist/synth.hpp"

namespace statconsist {

struct AsrCell {
    double asr = 0.0;
    std::size_t successes = 0;
    std::size_t denominator = 0;  // fakes the detector flagged before the attack
};

// Fraction of originally detected fakes that the detector labels real after
// the attack. `advs` must be aligned with `originals`.
AsrCell attack_success(const Detector& d, const std::vector<Image>& originals, const std::vector<Image>& advs);

// 8-bit quantization as applied by a PNG round trip.
std::vector<Image> quantize_images(const std::vector<Image>& images);

struct MethodAdvs {
    std::string method;
    std::vector<Image> advs;
};

struct TransferMatrix {
    std::string source;
    std::vector<std::string> methods;
    std::vector<std::string> targets;
    std::vector<std::vector<double>> asr;            // [method][target]
    std::vector<std::vector<double>> asr_quantized;  // after 8-bit rounding
    std::vector<std::vector<std::size_t>> denominators;

    double at(const std::string& method, const std::string& target) const;
};

TransferMatrix evaluate_transfer(const std::string& source, const std::vector<MethodAdvs>& methods,
                                 const std::vector<NamedDetector>& targets, const std::vector<Image>& originals);

inline constexpr int kReportSchemaVersion = 1;
inline constexpr int kExperimentConfigVersion = 1;

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    CorpusSpec corpus;
    // Fresh images per class for the attack stage, drawn after the training indices.
    std::size_t attack_images = 240;
    TrainConfig train;
    std::vector<std::size_t> conv_channels{8, 16, 32};
    std::size_t hidden = 32;
    AttackConfig attack;
    std::vector<double> sweep_sigmas{0.0, 0.5, 1.0, 2.0};
    bool ablation = true;
    bool save_detectors = true;

    void validate() const;
};

// Unknown keys anywhere in the document are rejected.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);

struct DetectorRecord {
    std::string name;
    DetectorKind kind = DetectorKind::spatial_cnn;
    std::uint64_t seed = 0;
    TrainReport training;
};

struct SetStatistics {
    std::string set;
    double tail_mass = 0.0;
    double high_frequency = 0.0;  // mean top-quarter log power
    std::size_t peak_count = 0;
    double max_peak_strength = 0.0;  // 0 when no peak passes the threshold
};

SetStatistics set_statistics(const std::string& name, const std::vector<Image>& images);

struct QualityRow {
    std::string method;
    QualityProxies quality;
};

struct ConstraintLog {
    double max_noise_linf = 0.0;         // over every iteration of every run
    double max_weight_sum_error = 0.0;   // |sum(effective) - 1| over layers and iterations
    std::size_t checks = 0;
};

struct ExperimentReport {
    int schema_version = kReportSchemaVersion;
    std::uint64_t seed = 0;
    SmoothnessSign smoothness_sign = SmoothnessSign::as_printed;
    std::vector<DetectorRecord> detectors;
    TransferMatrix transfer;
    Trace stat_trace;
    Trace mstat_trace;
    std::vector<SweepRow> sweep;
    AblationTable ablation;
    std::vector<QualityRow> quality;
    std::vector<SetStatistics> statistics;
    ConstraintLog constraints;
    double stat_white_box = 0.0;
    double mstat_white_box = 0.0;
    // Diagnostics behind the plots, keyed by image set.
    std::vector<std::pair<std::string, SpectrumProfile>> spectra;
    std::vector<std::pair<std::string, std::vector<double>>> histograms;
};

nlohmann::json to_json(const ExperimentReport& r);

// Failure inside one pipeline stage; what() is prefixed with "[stage]".
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what);
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

using ProgressFn = std::function<void(const std::string& stage, const std::string& message)>;

// Runs synth, training, attacks and evaluation. Outputs accumulate in
// `<root>/partial` and the directory is renamed to `<root>/report` on success.
ExperimentReport full_experiment(const ExperimentConfig& cfg, const std::filesystem::path& root,
                                 const ProgressFn& progress = {});

// Writes the CSV/JSON files and plots of a report into `dir`.
void write_report(const ExperimentReport& r, const std::filesystem::path& dir);

// Histogram, radial spectrum, peak list and a summary JSON for one image set.
void write_analysis(const std::vector<Image>& images, const std::filesystem::path& dir);

}  // namespace statconsist
