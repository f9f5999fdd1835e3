#include "statconsist/synth.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "statconsist/png_io.hpp"
#include "statconsist/transforms.hpp"

namespace statconsist {

using nlohmann::json;

void CorpusSpec::validate() const {
    const auto& fa = fake_artifacts;
    if (size < 4) throw std::invalid_argument("corpus image size must be >= 4");
    if (!(fa.range_lo >= 0.0 && fa.range_lo < fa.range_hi && fa.range_hi <= 1.0)) {
        throw std::invalid_argument("dynamic range must satisfy 0 <= lo < hi <= 1");
    }
    if (fa.checker_period < 2) throw std::invalid_argument("checker_period must be >= 2");
    if (fa.checker_amp < 0.0 || fa.highfreq_boost <= 0.0) throw std::invalid_argument("invalid fake artifact strengths");
    if (n_per_class == 0) throw std::invalid_argument("n_per_class must be positive");
}

void to_json(json& j, const CorpusSpec& s) {
    j = json{{"n_per_class", s.n_per_class},
             {"size", s.size},
             {"seed", s.seed},
             {"beta", s.beta},
             {"boost_cutoff", s.boost_cutoff},
             {"stretch_tail", s.stretch_tail},
             {"fake_artifacts",
              {{"highfreq_boost", s.fake_artifacts.highfreq_boost},
               {"checker_period", s.fake_artifacts.checker_period},
               {"checker_amp", s.fake_artifacts.checker_amp},
               {"dynamic_range", {s.fake_artifacts.range_lo, s.fake_artifacts.range_hi}}}}};
}

void from_json(const json& j, CorpusSpec& s) {
    s.n_per_class = j.at("n_per_class").get<std::size_t>();
    s.size = j.at("size").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.beta = j.value("beta", 1.2);
    s.boost_cutoff = j.value("boost_cutoff", 0.375);
    s.stretch_tail = j.value("stretch_tail", 0.025);
    const auto& fa = j.at("fake_artifacts");
    s.fake_artifacts.highfreq_boost = fa.at("highfreq_boost").get<double>();
    s.fake_artifacts.checker_period = fa.at("checker_period").get<std::size_t>();
    s.fake_artifacts.checker_amp = fa.at("checker_amp").get<double>();
    auto range = fa.at("dynamic_range").get<std::vector<double>>();
    if (range.size() != 2) throw std::invalid_argument("dynamic_range must have two entries");
    s.fake_artifacts.range_lo = range[0];
    s.fake_artifacts.range_hi = range[1];
}

std::uint64_t image_seed(const CorpusSpec& spec, int label, std::size_t index) {
    // splitmix64 finalizer over a packed key
    std::uint64_t z = spec.seed * 0x9E3779B97F4A7C15ULL + (static_cast<std::uint64_t>(index) << 1) +
                      static_cast<std::uint64_t>(label) + 0x632BE59BD9B4E019ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

double radial_frequency(std::size_t i, std::size_t j, std::size_t n) {
    return std::hypot(dft_frequency(i, n), dft_frequency(j, n));
}

// 1/f^beta field from white Gaussian noise; radial frequencies at or above
// `boost_cutoff` are scaled by `boost`. The result is stretched so that
// `stretch_tail` of the pixels clip at each end of [0,1].
Tensor stretched_field(const CorpusSpec& spec, std::uint64_t seed, double boost) {
    std::size_t n = spec.size;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Tensor white({n, n});
    for (double& v : white.data()) v = gauss(rng);
    ComplexField f = dft2(to_complex(white));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double fr = radial_frequency(i, j, n);
            double gain = fr > 0.0 ? std::pow(fr, -spec.beta) : 0.0;
            if (fr >= spec.boost_cutoff) gain *= boost;
            f.at(i, j) *= gain;
        }
    }
    ComplexField back = idft2(f);
    Tensor field({n, n});
    for (std::size_t k = 0; k < field.size(); ++k) field[k] = back.v[k].real();

    std::vector<double> sorted(field.data().begin(), field.data().end());
    std::sort(sorted.begin(), sorted.end());
    auto cut = static_cast<std::size_t>(std::floor(spec.stretch_tail * static_cast<double>(sorted.size())));
    double lo = sorted[cut];
    double hi = sorted[sorted.size() - 1 - cut];
    for (double& v : field.data()) v = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
    return field;
}

Image gray_to_rgb(const Tensor& g, Provenance label) {
    std::size_t h = g.dim(0), w = g.dim(1);
    Tensor px({h, w, 3});
    for (std::size_t p = 0; p < h * w; ++p) {
        for (std::size_t c = 0; c < 3; ++c) px[p * 3 + c] = g[p];
    }
    return Image(std::move(px), label);
}

Tensor compressed_base(const CorpusSpec& spec, std::size_t index) {
    Tensor f = stretched_field(spec, image_seed(spec, kFakeLabel, index), spec.fake_artifacts.highfreq_boost);
    const auto& fa = spec.fake_artifacts;
    for (double& v : f.data()) v = fa.range_lo + (fa.range_hi - fa.range_lo) * v;
    return f;
}

}  // namespace

Image gen_real(const CorpusSpec& spec, std::size_t index) {
    spec.validate();
    return gray_to_rgb(stretched_field(spec, image_seed(spec, kRealLabel, index), 1.0), Provenance::real);
}

Image gen_fake_base(const CorpusSpec& spec, std::size_t index) {
    spec.validate();
    return gray_to_rgb(compressed_base(spec, index), Provenance::fake);
}

Tensor checker_pattern(const CorpusSpec& spec) {
    std::size_t n = spec.size;
    std::size_t p = spec.fake_artifacts.checker_period;
    // +1 for the first half of each period, -1 for the second.
    auto square = [p](std::size_t i) { return 2 * (i % p) < p ? 1.0 : -1.0; };
    Tensor c({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) c[i * n + j] = spec.fake_artifacts.checker_amp * square(i) * square(j);
    }
    return c;
}

Image gen_fake(const CorpusSpec& spec, std::size_t index) {
    spec.validate();
    Tensor out = compressed_base(spec, index);
    Tensor checker = checker_pattern(spec);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::clamp(out[k] + checker[k], 0.0, 1.0);
    return gray_to_rgb(out, Provenance::fake);
}

Corpus generate_corpus(const CorpusSpec& spec, std::size_t first_index) {
    Corpus c;
    for (std::size_t i = 0; i < spec.n_per_class; ++i) {
        c.reals.push_back(gen_real(spec, first_index + i));
        c.fakes.push_back(gen_fake(spec, first_index + i));
    }
    return c;
}

namespace {

std::uint32_t file_crc(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + p.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

json manifest_json(const Manifest& m) {
    json entries = json::array();
    for (const auto& e : m.entries) {
        entries.push_back({{"path", e.path},
                           {"class", e.label == kRealLabel ? "real" : "fake"},
                           {"index", e.index},
                           {"seed", e.seed},
                           {"crc32", e.crc32}});
    }
    return json{{"schema_version", m.schema_version}, {"spec", m.spec}, {"entries", entries}, {"checksum", m.checksum}};
}

}  // namespace

Manifest write_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir, std::size_t first_index) {
    spec.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    if (fs::exists(out_dir) && !fs::is_directory(out_dir)) {
        throw std::runtime_error("corpus output " + out_dir.string() + " exists and is not a directory");
    }
    fs::remove(out_dir / "manifest.json", ec);
    for (const char* sub : {"real", "fake"}) {
        fs::create_directories(out_dir / sub, ec);
        if (ec || !fs::is_directory(out_dir / sub)) {
            throw std::runtime_error("cannot create " + (out_dir / sub).string());
        }
    }
    Manifest m;
    m.spec = spec;
    for (int label : {kRealLabel, kFakeLabel}) {
        for (std::size_t i = 0; i < spec.n_per_class; ++i) {
            std::size_t idx = first_index + i;
            char name[64];
            std::snprintf(name, sizeof name, "%s/%s_%05zu.png", label == kRealLabel ? "real" : "fake",
                          label == kRealLabel ? "real" : "fake", idx);
            Image img = label == kRealLabel ? gen_real(spec, idx) : gen_fake(spec, idx);
            png_write(out_dir / name, img);
            m.entries.push_back({name, label, idx, image_seed(spec, label, idx), file_crc(out_dir / name)});
        }
    }
    std::uint32_t crc = 0;
    for (const auto& e : m.entries) {
        unsigned char b[4] = {static_cast<unsigned char>(e.crc32), static_cast<unsigned char>(e.crc32 >> 8),
                              static_cast<unsigned char>(e.crc32 >> 16), static_cast<unsigned char>(e.crc32 >> 24)};
        crc = static_cast<std::uint32_t>(crc32(crc, b, 4));
    }
    m.checksum = crc;

    fs::path tmp = out_dir / "manifest.json.tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw std::runtime_error("cannot write manifest in " + out_dir.string());
        os << manifest_json(m).dump(2) << '\n';
        if (!os) throw std::runtime_error("failed writing manifest in " + out_dir.string());
    }
    fs::rename(tmp, out_dir / "manifest.json");
    return m;
}

Manifest read_manifest(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw std::runtime_error("no corpus manifest in " + dir.string());
    json j = json::parse(is);
    Manifest m;
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kManifestSchemaVersion) throw std::runtime_error("unsupported manifest schema version");
    m.spec = j.at("spec").get<CorpusSpec>();
    for (const auto& e : j.at("entries")) {
        ManifestEntry me;
        me.path = e.at("path").get<std::string>();
        me.label = e.at("class").get<std::string>() == "real" ? kRealLabel : kFakeLabel;
        me.index = e.at("index").get<std::size_t>();
        me.seed = e.at("seed").get<std::uint64_t>();
        me.crc32 = e.at("crc32").get<std::uint32_t>();
        m.entries.push_back(me);
    }
    m.checksum = j.at("checksum").get<std::uint32_t>();
    return m;
}

Corpus load_corpus(const std::filesystem::path& dir) {
    Manifest m = read_manifest(dir);
    Corpus c;
    for (const auto& e : m.entries) {
        if (file_crc(dir / e.path) != e.crc32) throw std::runtime_error("checksum mismatch for " + e.path);
        if (e.label == kRealLabel) {
            c.reals.push_back(png_read(dir / e.path, Provenance::real));
        } else {
            c.fakes.push_back(png_read(dir / e.path, Provenance::fake));
        }
    }
    return c;
}

std::vector<Image> load_image_dir(const std::filesystem::path& dir, Provenance label) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw std::runtime_error(dir.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Image> out;
    for (const auto& f : files) out.push_back(png_read(f, label));
    return out;
}

}  // namespace statconsist
