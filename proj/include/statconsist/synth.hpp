#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "statconsist/image.hpp"

namespace statconsist {

struct FakeArtifacts {
    double highfreq_boost = 1.8;
    std::size_t checker_period = 4;
    double checker_amp = 0.03;
    double range_lo = 0.08;
    double range_hi = 0.92;
};

/**
 * Procedural real/fake populations. Reals are 1/f^beta random fields stretched
 * to the full [0,1] range. Fakes come from the same generator with the
 * high-frequency band amplified, are compressed into a narrower range and carry
 * an additive fixed-phase checkerboard.
 */
struct CorpusSpec {
    std::size_t n_per_class = 500;
    std::size_t size = 64;
    std::uint64_t seed = 0;
    FakeArtifacts fake_artifacts;
    double beta = 1.2;
    // Radial frequency (cycles/sample) above which the fake boost applies.
    double boost_cutoff = 0.375;
    // Fraction of pixels clipped at each end by the real contrast stretch.
    double stretch_tail = 0.025;

    void validate() const;
};

void to_json(nlohmann::json& j, const CorpusSpec& s);
void from_json(const nlohmann::json& j, CorpusSpec& s);

Image gen_real(const CorpusSpec& spec, std::size_t index);
Image gen_fake(const CorpusSpec& spec, std::size_t index);

// Boosted, range-compressed fake before the checkerboard is added.
Image gen_fake_base(const CorpusSpec& spec, std::size_t index);

// The additive periodic pattern, [size,size].
Tensor checker_pattern(const CorpusSpec& spec);

// Per-image generator seed for (class, index).
std::uint64_t image_seed(const CorpusSpec& spec, int label, std::size_t index);

struct ManifestEntry {
    std::string path;  // relative to the corpus root
    int label = 0;
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::uint32_t crc32 = 0;
};

struct Manifest {
    int schema_version = 1;
    CorpusSpec spec;
    std::vector<ManifestEntry> entries;
    std::uint32_t checksum = 0;  // CRC32 over the per-file CRCs in entry order
};

inline constexpr int kManifestSchemaVersion = 1;

// Writes real/ and fake/ PNGs plus manifest.json. The manifest is written last,
// atomically, so a failed run leaves no manifest behind.
Manifest write_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir,
                      std::size_t first_index = 0);

Manifest read_manifest(const std::filesystem::path& dir);

struct Corpus {
    std::vector<Image> reals;
    std::vector<Image> fakes;
};

// Loads the images listed in a corpus manifest.
Corpus load_corpus(const std::filesystem::path& dir);

// Loads every *.png in a directory in lexicographic order.
std::vector<Image> load_image_dir(const std::filesystem::path& dir, Provenance label);

Corpus generate_corpus(const CorpusSpec& spec, std::size_t first_index = 0);

}  // namespace statconsist
