#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "statconsist/degradations.hpp"
#include "statconsist/detector.hpp"
#include "statconsist/image.hpp"

namespace statconsist {

enum class SmoothnessSign {
    as_printed,  // minimize mmd2 + S
    penalty,     // minimize mmd2 - S, i.e. penalize large |a| and rough phi
};

std::string to_string(SmoothnessSign s);
SmoothnessSign parse_smoothness_sign(const std::string& s);

struct StepSizes {
    double a = 1e-2;
    double phi = 1e-3;
    double sigma = 5e-2;
    double noise = 1.0 / 255.0;
    double weights = 1e-2;
};

// Which degradations are optimized. Disabled ones stay at identity.
struct PatternMask {
    bool exposure = true;
    bool blur = true;
    bool noise = true;

    bool any() const { return exposure || blur || noise; }
};

struct AttackConfig {
    std::size_t iterations = 40;
    StepSizes steps;
    double epsilon = 8.0 / 255.0;
    double lambda_a = 0.1;
    double lambda_phi = 0.1;
    std::size_t layers = 3;
    std::size_t batch = 30;
    SmoothnessSign smoothness_sign = SmoothnessSign::as_printed;
    std::uint64_t seed = 0;
    int degree = 11;
    std::size_t grid = 5;
    std::size_t kernel_size = 3;
    // Starting blur width. At kSigmaMin the neighbour weights underflow and
    // d/dsigma is exactly zero; 0.2 still reproduces the input within ~1e-5.
    double sigma_init = 0.2;
    // Optimize each image on its own against the real set instead of one
    // parameter set per batch.
    bool per_image = false;
    PatternMask patterns;
    // Batches are independent; this many are processed concurrently.
    std::size_t threads = 1;

    void validate() const;
};

struct TraceRow {
    std::size_t iter = 0;
    double loss = 0.0;
    double mmd2 = 0.0;
    double smooth_term = 0.0;
};

// One row per iteration (plus the final state), averaged over batches.
using Trace = std::vector<TraceRow>;

struct LayerMixWeights {
    Tensor raw;  // [layers, 4]; columns are exposure, blur, noise, pass-through

    static LayerMixWeights uniform(std::size_t layers);
    // Row-wise softmax of `raw`.
    Tensor effective() const;
};

// Parameters of one batch. A StatAttack run has exactly one layer.
struct BatchParams {
    std::vector<AttackParams> layers;
    LayerMixWeights weights;  // empty for StatAttack
    std::size_t first_image = 0;
    std::size_t image_count = 0;
};

struct AttackResult {
    std::vector<Image> advs;
    std::vector<BatchParams> params;
    Trace trace;
    SmoothnessSign smoothness_sign = SmoothnessSign::as_printed;
};

// Thrown when the objective stops being finite; carries the trace so far.
class AttackAborted : public std::runtime_error {
public:
    AttackAborted(const std::string& what, Trace trace);
    Trace trace;
};

// Called after every parameter update with the batch index, iteration and the
// post-projection parameters. With cfg.threads > 1 it may be called
// concurrently from several batches.
using IterationObserver = std::function<void(std::size_t batch, std::size_t iter, const BatchParams&)>;

AttackResult stat_attack(const std::vector<Image>& fakes, const std::vector<Image>& reals, const Detector& detector,
                         const AttackConfig& cfg, const IterationObserver& observer = {});

AttackResult mstat_attack(const std::vector<Image>& fakes, const std::vector<Image>& reals,
                          const Detector& detector, const AttackConfig& cfg, const IterationObserver& observer = {});

// Applies trained batch parameters to the images they were fitted on.
std::vector<Image> apply_batch_params(const std::vector<Image>& fakes, const BatchParams& p, const AttackConfig& cfg);

// L-infinity PGD on cross-entropy toward "real": random start, cfg.iterations
// steps of cfg.epsilon / 10.
std::vector<Image> pgd_baseline(const std::vector<Image>& fakes, const Detector& detector, const AttackConfig& cfg);
std::vector<Image> fgsm_baseline(const std::vector<Image>& fakes, const Detector& detector, const AttackConfig& cfg);

struct NamedDetector {
    std::string name;
    const Detector* detector = nullptr;
};

struct AblationRow {
    std::string pattern;  // e.g. "only_blur", "wo_noise"
    PatternMask mask;
    std::vector<double> asr;  // per target, aligned with AblationTable::targets
    std::vector<std::size_t> denominators;
    AttackResult result;
};

struct AblationTable {
    std::vector<std::string> targets;
    std::vector<AblationRow> rows;
};

// The six single-pattern variants: only_{noise,exposure,blur}, wo_{noise,exposure,blur}.
std::vector<std::pair<std::string, PatternMask>> ablation_patterns();

AblationTable ablation_single_pattern(const std::vector<Image>& fakes, const std::vector<Image>& reals,
                                      const Detector& source, const std::vector<NamedDetector>& targets,
                                      const AttackConfig& cfg);

nlohmann::json params_to_json(const BatchParams& p);
nlohmann::json params_to_json(const std::vector<BatchParams>& p);

}  // namespace statconsist
