#include "statconsist/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "statconsist/parallel.hpp"
#include "statconsist/plot.hpp"

namespace statconsist {

using nlohmann::json;
namespace fs = std::filesystem;

AsrCell attack_success(const Detector& d, const std::vector<Image>& originals, const std::vector<Image>& advs) {
    if (originals.size() != advs.size()) {
        throw std::invalid_argument("adversarial set (" + std::to_string(advs.size()) +
                                    ") is not aligned with originals (" + std::to_string(originals.size()) + ")");
    }
    if (originals.empty()) return {};
    auto before = d.predict(originals);
    auto after = d.predict(advs);
    AsrCell c;
    for (std::size_t i = 0; i < before.size(); ++i) {
        if (before[i] != kFakeLabel) continue;
        ++c.denominator;
        c.successes += after[i] == kRealLabel;
    }
    c.asr = c.denominator ? static_cast<double>(c.successes) / static_cast<double>(c.denominator) : 0.0;
    return c;
}

std::vector<Image> quantize_images(const std::vector<Image>& images) {
    std::vector<Image> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(quantize8(img));
    return out;
}

double TransferMatrix::at(const std::string& method, const std::string& target) const {
    auto mi = std::find(methods.begin(), methods.end(), method);
    auto ti = std::find(targets.begin(), targets.end(), target);
    if (mi == methods.end() || ti == targets.end()) {
        throw std::out_of_range("no transfer entry for " + method + " -> " + target);
    }
    return asr[static_cast<std::size_t>(mi - methods.begin())][static_cast<std::size_t>(ti - targets.begin())];
}

TransferMatrix evaluate_transfer(const std::string& source, const std::vector<MethodAdvs>& methods,
                                 const std::vector<NamedDetector>& targets, const std::vector<Image>& originals) {
    TransferMatrix m;
    m.source = source;
    for (const auto& t : targets) {
        t.detector->require_trained("evaluate_transfer");
        m.targets.push_back(t.name);
    }
    for (const auto& method : methods) {
        if (method.advs.size() != originals.size()) {
            throw std::invalid_argument("method '" + method.method + "' is not aligned with the originals");
        }
        m.methods.push_back(method.method);
        auto quantized = quantize_images(method.advs);
        std::vector<double> row, qrow;
        std::vector<std::size_t> den;
        for (const auto& t : targets) {
            AsrCell c = attack_success(*t.detector, originals, method.advs);
            AsrCell q = attack_success(*t.detector, originals, quantized);
            row.push_back(c.asr);
            qrow.push_back(q.asr);
            den.push_back(c.denominator);
        }
        m.asr.push_back(std::move(row));
        m.asr_quantized.push_back(std::move(qrow));
        m.denominators.push_back(std::move(den));
    }
    return m;
}

// ---- configuration --------------------------------------------------------

void ExperimentConfig::validate() const {
    corpus.validate();
    attack.validate();
    if (attack.layers < 2) throw std::invalid_argument("attack.layers must be >= 2 for the multi-layer run");
    if (attack_images == 0) throw std::invalid_argument("attack_images must be positive");
    if (conv_channels.empty()) throw std::invalid_argument("conv_channels must be non-empty");
    if (sweep_sigmas.empty()) throw std::invalid_argument("sweep_sigmas must be non-empty");
    if (threads == 0) throw std::invalid_argument("threads must be positive");
    for (double s : sweep_sigmas) {
        if (s < 0.0 || s > kSigmaMax) throw std::invalid_argument("sweep sigma out of range");
    }
}

namespace {

json train_json(const TrainConfig& t) {
    return json{{"epochs", t.epochs},          {"lr", t.lr},       {"momentum", t.momentum},
                {"batch", t.batch},            {"holdout_fraction", t.holdout_fraction}};
}

json attack_json(const AttackConfig& a) {
    return json{{"iterations", a.iterations},
                {"steps",
                 {{"a", a.steps.a},
                  {"phi", a.steps.phi},
                  {"sigma", a.steps.sigma},
                  {"noise", a.steps.noise},
                  {"weights", a.steps.weights}}},
                {"epsilon", a.epsilon},
                {"lambda_a", a.lambda_a},
                {"lambda_phi", a.lambda_phi},
                {"layers", a.layers},
                {"batch", a.batch},
                {"smoothness_sign", to_string(a.smoothness_sign)},
                {"degree", a.degree},
                {"grid", a.grid},
                {"kernel_size", a.kernel_size},
                {"sigma_init", a.sigma_init},
                {"per_image", a.per_image}};
}

json corpus_json(const CorpusSpec& c) {
    json j = c;
    j.erase("seed");
    return j;
}

void reject_unknown(const json& user, const json& reference, const std::string& where) {
    if (!user.is_object()) return;
    for (auto it = user.begin(); it != user.end(); ++it) {
        std::string path = where.empty() ? it.key() : where + "." + it.key();
        if (!reference.contains(it.key())) throw std::invalid_argument("unknown configuration key '" + path + "'");
        if (reference.at(it.key()).is_object()) {
            if (!it->is_object()) throw std::invalid_argument("configuration key '" + path + "' must be an object");
            reject_unknown(*it, reference.at(it.key()), path);
        }
    }
}

}  // namespace

json to_json(const ExperimentConfig& c) {
    return json{{"schema_version", kExperimentConfigVersion},
                {"seed", c.seed},
                {"threads", c.threads},
                {"corpus", corpus_json(c.corpus)},
                {"attack_images", c.attack_images},
                {"train", train_json(c.train)},
                {"conv_channels", c.conv_channels},
                {"hidden", c.hidden},
                {"attack", attack_json(c.attack)},
                {"sweep_sigmas", c.sweep_sigmas},
                {"ablation", c.ablation},
                {"save_detectors", c.save_detectors}};
}

ExperimentConfig experiment_config_from_json(const json& user) {
    if (!user.is_object()) throw std::invalid_argument("experiment configuration must be a JSON object");
    json merged = to_json(ExperimentConfig{});
    reject_unknown(user, merged, "");
    if (user.contains("schema_version") && user.at("schema_version").get<int>() != kExperimentConfigVersion) {
        throw std::invalid_argument("unsupported configuration schema_version " + user.at("schema_version").dump());
    }
    merged.merge_patch(user);

    ExperimentConfig c;
    c.seed = merged.at("seed").get<std::uint64_t>();
    c.threads = merged.at("threads").get<std::size_t>();
    json corpus = merged.at("corpus");
    corpus["seed"] = c.seed;
    c.corpus = corpus.get<CorpusSpec>();
    c.attack_images = merged.at("attack_images").get<std::size_t>();
    const json& t = merged.at("train");
    c.train.epochs = t.at("epochs").get<std::size_t>();
    c.train.lr = t.at("lr").get<double>();
    c.train.momentum = t.at("momentum").get<double>();
    c.train.batch = t.at("batch").get<std::size_t>();
    c.train.holdout_fraction = t.at("holdout_fraction").get<double>();
    c.conv_channels = merged.at("conv_channels").get<std::vector<std::size_t>>();
    c.hidden = merged.at("hidden").get<std::size_t>();
    const json& a = merged.at("attack");
    c.attack.iterations = a.at("iterations").get<std::size_t>();
    c.attack.steps.a = a.at("steps").at("a").get<double>();
    c.attack.steps.phi = a.at("steps").at("phi").get<double>();
    c.attack.steps.sigma = a.at("steps").at("sigma").get<double>();
    c.attack.steps.noise = a.at("steps").at("noise").get<double>();
    c.attack.steps.weights = a.at("steps").at("weights").get<double>();
    c.attack.epsilon = a.at("epsilon").get<double>();
    c.attack.lambda_a = a.at("lambda_a").get<double>();
    c.attack.lambda_phi = a.at("lambda_phi").get<double>();
    c.attack.layers = a.at("layers").get<std::size_t>();
    c.attack.batch = a.at("batch").get<std::size_t>();
    c.attack.smoothness_sign = parse_smoothness_sign(a.at("smoothness_sign").get<std::string>());
    c.attack.degree = a.at("degree").get<int>();
    c.attack.grid = a.at("grid").get<std::size_t>();
    c.attack.kernel_size = a.at("kernel_size").get<std::size_t>();
    c.attack.sigma_init = a.at("sigma_init").get<double>();
    c.attack.per_image = a.at("per_image").get<bool>();
    c.attack.seed = c.seed;
    c.attack.threads = c.threads;
    c.sweep_sigmas = merged.at("sweep_sigmas").get<std::vector<double>>();
    c.ablation = merged.at("ablation").get<bool>();
    c.save_detectors = merged.at("save_detectors").get<bool>();
    c.validate();
    return c;
}

// ---- statistics -----------------------------------------------------------

SetStatistics set_statistics(const std::string& name, const std::vector<Image>& images) {
    SetStatistics s;
    s.set = name;
    s.tail_mass = exposure_tail_mass(images);
    s.high_frequency = high_frequency_log_power(radial_power_spectrum(images));
    auto peaks = spectral_peak_report(images);
    s.peak_count = peaks.size();
    for (const auto& p : peaks) s.max_peak_strength = std::max(s.max_peak_strength, p.strength);
    return s;
}

// ---- report ---------------------------------------------------------------

StageError::StageError(std::string stage, const std::string& what)
    : std::runtime_error("[" + stage + "] " + what), stage_(std::move(stage)) {}

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

json trace_json(const Trace& t) {
    json arr = json::array();
    for (const auto& r : t) {
        arr.push_back({{"iter", r.iter}, {"loss", r.loss}, {"mmd2", r.mmd2}, {"smooth_term", r.smooth_term}});
    }
    return arr;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << text;
    if (!os) throw std::runtime_error("failed writing " + p.string());
}

void write_trace_csv(const fs::path& p, const Trace& t) {
    std::string out = "iter,loss,mmd2,smooth_term\n";
    for (const auto& r : t) {
        out += std::to_string(r.iter) + "," + num(r.loss) + "," + num(r.mmd2) + "," + num(r.smooth_term) + "\n";
    }
    write_text(p, out);
}

}  // namespace

json to_json(const ExperimentReport& r) {
    json dets = json::array();
    for (const auto& d : r.detectors) {
        dets.push_back({{"name", d.name},
                        {"kind", to_string(d.kind)},
                        {"seed", d.seed},
                        {"train_accuracy", d.training.train_accuracy},
                        {"heldout_accuracy", d.training.heldout_accuracy},
                        {"heldout_count", d.training.heldout_count},
                        {"train_seconds", d.training.seconds},
                        {"epoch_loss", d.training.epoch_loss}});
        if (d.kind == DetectorKind::fft_freq) dets.back()["note"] = "structural stand-in for a DFT-based detector";
    }
    const auto& m = r.transfer;
    json transfer{{"source", m.source},
                  {"methods", m.methods},
                  {"targets", m.targets},
                  {"asr", m.asr},
                  {"asr_quantized", m.asr_quantized},
                  {"denominators", m.denominators}};
    json sweep = json::array();
    for (const auto& s : r.sweep) sweep.push_back({{"sigma", s.sigma}, {"mmd2", s.mmd2}});
    json ablation = json::array();
    for (const auto& row : r.ablation.rows) {
        ablation.push_back({{"pattern", row.pattern}, {"asr", row.asr}, {"denominators", row.denominators}});
    }
    json quality = json::array();
    for (const auto& q : r.quality) {
        quality.push_back(
            {{"method", q.method}, {"linf", q.quality.linf}, {"l2", q.quality.l2}, {"spectral_dist", q.quality.spectral_dist}});
    }
    json stats = json::array();
    for (const auto& s : r.statistics) {
        stats.push_back({{"set", s.set},
                         {"tail_mass", s.tail_mass},
                         {"high_frequency", s.high_frequency},
                         {"peak_count", s.peak_count},
                         {"max_peak_strength", s.max_peak_strength}});
    }
    return json{{"schema_version", r.schema_version},
                {"seed", r.seed},
                {"smoothness_sign", to_string(r.smoothness_sign)},
                {"detectors", dets},
                {"transfer", transfer},
                {"white_box",
                 {{"stat", r.stat_white_box},
                  {"mstat", r.mstat_white_box},
                  {"mstat_exceeds_stat", r.mstat_white_box > r.stat_white_box}}},
                {"sweep", sweep},
                {"ablation", {{"targets", r.ablation.targets}, {"rows", ablation}}},
                {"quality", quality},
                {"statistics", stats},
                {"constraints",
                 {{"max_noise_linf", r.constraints.max_noise_linf},
                  {"max_weight_sum_error", r.constraints.max_weight_sum_error},
                  {"checks", r.constraints.checks}}},
                {"trace_stat", trace_json(r.stat_trace)},
                {"trace_mstat", trace_json(r.mstat_trace)}};
}

void write_report(const ExperimentReport& r, const fs::path& dir) {
    fs::create_directories(dir);
    write_text(dir / "report.json", to_json(r).dump(2) + "\n");

    std::string det = "name,kind,seed,train_accuracy,heldout_accuracy,final_loss\n";
    for (const auto& d : r.detectors) {
        double last = d.training.epoch_loss.empty() ? 0.0 : d.training.epoch_loss.back();
        det += d.name + "," + to_string(d.kind) + "," + std::to_string(d.seed) + "," + num(d.training.train_accuracy) +
               "," + num(d.training.heldout_accuracy) + "," + num(last) + "\n";
    }
    write_text(dir / "detectors.csv", det);

    const auto& m = r.transfer;
    std::string tr = "source,method,target,denominator,asr,asr_quantized\n";
    for (std::size_t i = 0; i < m.methods.size(); ++i) {
        for (std::size_t j = 0; j < m.targets.size(); ++j) {
            tr += m.source + "," + m.methods[i] + "," + m.targets[j] + "," + std::to_string(m.denominators[i][j]) +
                  "," + num(m.asr[i][j]) + "," + num(m.asr_quantized[i][j]) + "\n";
        }
    }
    write_text(dir / "transfer.csv", tr);

    std::string sw = "sigma,mmd2\n";
    for (const auto& s : r.sweep) sw += num(s.sigma) + "," + num(s.mmd2) + "\n";
    write_text(dir / "sweep.csv", sw);

    if (!r.ablation.rows.empty()) {
        std::string ab = "pattern,target,denominator,asr\n";
        for (const auto& row : r.ablation.rows) {
            for (std::size_t j = 0; j < r.ablation.targets.size(); ++j) {
                ab += row.pattern + "," + r.ablation.targets[j] + "," + std::to_string(row.denominators[j]) + "," +
                      num(row.asr[j]) + "\n";
            }
        }
        write_text(dir / "ablation.csv", ab);
    }

    std::string q = "method,linf,l2,spectral_dist\n";
    for (const auto& row : r.quality) {
        q += row.method + "," + num(row.quality.linf) + "," + num(row.quality.l2) + "," +
             num(row.quality.spectral_dist) + "\n";
    }
    write_text(dir / "quality.csv", q);

    std::string st = "set,tail_mass,high_frequency,peak_count,max_peak_strength\n";
    for (const auto& s : r.statistics) {
        st += s.set + "," + num(s.tail_mass) + "," + num(s.high_frequency) + "," + std::to_string(s.peak_count) + "," +
              num(s.max_peak_strength) + "\n";
    }
    write_text(dir / "statistics.csv", st);

    write_trace_csv(dir / "trace_stat.csv", r.stat_trace);
    write_trace_csv(dir / "trace_mstat.csv", r.mstat_trace);

    fs::create_directories(dir / "plots");
    Series sweep{"mmd2", {}, {}};
    for (const auto& s : r.sweep) {
        sweep.x.push_back(s.sigma);
        sweep.y.push_back(s.mmd2);
    }
    line_plot(dir / "plots" / "sweep.png", {sweep});

    std::vector<Series> traces;
    for (const auto* t : {&r.stat_trace, &r.mstat_trace}) {
        Series s{t == &r.stat_trace ? "stat" : "mstat", {}, {}};
        for (const auto& row : *t) {
            s.x.push_back(static_cast<double>(row.iter));
            s.y.push_back(row.loss);
        }
        traces.push_back(std::move(s));
    }
    line_plot(dir / "plots" / "trace.png", traces);

    std::vector<Series> spectra, hists;
    std::string legend = "plot,series,color_index\n";
    for (std::size_t k = 0; k < r.spectra.size(); ++k) {
        const auto& [name, p] = r.spectra[k];
        spectra.push_back({name, std::vector<double>(p.frequency.begin() + 1, p.frequency.end()),
                           std::vector<double>(p.mean_log_power.begin() + 1, p.mean_log_power.end())});
        legend += "spectrum," + name + "," + std::to_string(k) + "\n";
    }
    for (std::size_t k = 0; k < r.histograms.size(); ++k) {
        const auto& [name, h] = r.histograms[k];
        Series s{name, {}, {}};
        for (std::size_t b = 0; b < h.size(); ++b) {
            s.x.push_back((static_cast<double>(b) + 0.5) / static_cast<double>(h.size()));
            s.y.push_back(h[b]);
        }
        hists.push_back(std::move(s));
        legend += "histogram," + name + "," + std::to_string(k) + "\n";
    }
    legend += "sweep,mmd2,0\ntrace,stat,0\ntrace,mstat,1\n";
    if (!spectra.empty()) line_plot(dir / "plots" / "spectrum.png", spectra);
    if (!hists.empty()) line_plot(dir / "plots" / "histogram.png", hists);
    write_text(dir / "plots" / "legend.csv", legend);
}

void write_analysis(const std::vector<Image>& images, const fs::path& dir) {
    fs::create_directories(dir);
    auto hist = brightness_histogram(images);
    std::string h = "bin_lo,bin_hi,mass\n";
    for (std::size_t b = 0; b < hist.size(); ++b) {
        h += num(static_cast<double>(b) / static_cast<double>(hist.size())) + "," +
             num(static_cast<double>(b + 1) / static_cast<double>(hist.size())) + "," + num(hist[b]) + "\n";
    }
    write_text(dir / "histogram.csv", h);

    auto spec = radial_power_spectrum(images);
    std::string sp = "frequency,mean_log_power\n";
    for (std::size_t b = 0; b < spec.frequency.size(); ++b) {
        sp += num(spec.frequency[b]) + "," + num(spec.mean_log_power[b]) + "\n";
    }
    write_text(dir / "spectrum.csv", sp);

    auto peaks = spectral_peak_report(images);
    std::string pk = "fy,fx,strength\n";
    for (const auto& p : peaks) pk += num(p.fy) + "," + num(p.fx) + "," + num(p.strength) + "\n";
    write_text(dir / "peaks.csv", pk);

    json summary{{"image_count", images.size()},
                 {"tail_mass", exposure_tail_mass(images)},
                 {"high_frequency", high_frequency_log_power(spec)},
                 {"peak_count", peaks.size()}};
    write_text(dir / "summary.json", summary.dump(2) + "\n");
}

// ---- pipeline -------------------------------------------------------------

namespace {

template <typename Fn>
void run_stage(const std::string& name, const ProgressFn& progress, Fn&& fn) {
    if (progress) progress(name, "start");
    try {
        fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
    if (progress) progress(name, "done");
}

}  // namespace

ExperimentReport full_experiment(const ExperimentConfig& cfg_in, const fs::path& root, const ProgressFn& progress) {
    ExperimentConfig cfg = cfg_in;
    cfg.corpus.seed = cfg.seed;
    cfg.attack.seed = cfg.seed;
    cfg.attack.threads = cfg.threads;
    cfg.validate();

    fs::path partial = root / "partial";
    fs::path final_dir = root / "report";
    if (fs::exists(final_dir)) throw std::invalid_argument("report directory already exists: " + final_dir.string());
    fs::remove_all(partial);
    fs::create_directories(partial);
    {
        std::ofstream os(partial / "config.json");
        os << to_json(cfg).dump(2) << "\n";
    }

    ExperimentReport report;
    report.seed = cfg.seed;
    report.smoothness_sign = cfg.attack.smoothness_sign;

    Corpus train_set, attack_set;
    run_stage("synth", progress, [&] {
        train_set = generate_corpus(cfg.corpus, 0);
        CorpusSpec held = cfg.corpus;
        held.n_per_class = cfg.attack_images;
        attack_set = generate_corpus(held, cfg.corpus.n_per_class);
        std::vector<SetStatistics> s{set_statistics("real", attack_set.reals), set_statistics("fake", attack_set.fakes)};
        report.statistics = s;
    });

    struct ZooEntry {
        std::string name;
        DetectorSpec spec;
    };
    std::vector<ZooEntry> zoo;
    auto spatial = [&](std::uint64_t k) {
        DetectorSpec s;
        s.kind = DetectorKind::spatial_cnn;
        s.conv_channels = cfg.conv_channels;
        s.input_size = cfg.corpus.size;
        s.seed = cfg.seed * 16 + k;
        return s;
    };
    auto freq = [&](DetectorKind kind, std::uint64_t k) {
        DetectorSpec s;
        s.kind = kind;
        s.input_size = cfg.corpus.size;
        s.hidden = cfg.hidden;
        s.seed = cfg.seed * 16 + k;
        return s;
    };
    zoo.push_back({"spatial_cnn_a", spatial(1)});
    zoo.push_back({"spatial_cnn_b", spatial(2)});
    zoo.push_back({"dct_freq", freq(DetectorKind::dct_freq, 3)});
    zoo.push_back({"fft_freq", freq(DetectorKind::fft_freq, 4)});

    std::vector<Detector> detectors;
    run_stage("train", progress, [&] {
        for (const auto& z : zoo) detectors.emplace_back(z.spec);
        std::vector<TrainReport> reports(zoo.size());
        LabeledImages data = LabeledImages::from(train_set.reals, train_set.fakes);
        parallel_for(zoo.size(), cfg.threads, [&](std::size_t i) {
            TrainConfig tc = cfg.train;
            tc.seed = zoo[i].spec.seed;
            reports[i] = train(detectors[i], data, tc);
        });
        for (std::size_t i = 0; i < zoo.size(); ++i) {
            report.detectors.push_back({zoo[i].name, zoo[i].spec.kind, zoo[i].spec.seed, reports[i]});
            if (cfg.save_detectors) detectors[i].save(partial / "detectors" / zoo[i].name);
        }
    });

    std::vector<NamedDetector> targets;
    for (std::size_t i = 0; i < zoo.size(); ++i) targets.push_back({zoo[i].name, &detectors[i]});
    const Detector& source = detectors[0];
    const auto& fakes = attack_set.fakes;
    const auto& reals = attack_set.reals;

    std::mutex log_mutex;
    IterationObserver observer = [&](std::size_t, std::size_t, const BatchParams& bp) {
        double noise = 0.0, werr = 0.0;
        for (const auto& l : bp.layers) noise = std::max(noise, l.noise.noise_map.max_abs());
        if (bp.layers.size() > 1) {
            Tensor eff = bp.weights.effective();
            for (std::size_t k = 0; k < eff.dim(0); ++k) {
                double s = 0.0;
                for (std::size_t j = 0; j < eff.dim(1); ++j) s += eff.at({k, j});
                werr = std::max(werr, std::abs(s - 1.0));
            }
        }
        std::lock_guard<std::mutex> lock(log_mutex);
        report.constraints.max_noise_linf = std::max(report.constraints.max_noise_linf, noise);
        report.constraints.max_weight_sum_error = std::max(report.constraints.max_weight_sum_error, werr);
        ++report.constraints.checks;
    };

    std::vector<MethodAdvs> methods;
    run_stage("attack", progress, [&] {
        AttackConfig single = cfg.attack;
        single.layers = 1;
        AttackResult stat = stat_attack(fakes, reals, source, single, observer);
        report.stat_trace = stat.trace;
        write_trace_csv(partial / "trace_stat.csv", stat.trace);
        if (progress) progress("attack", "stat done");
        AttackResult mstat = mstat_attack(fakes, reals, source, cfg.attack, observer);
        report.mstat_trace = mstat.trace;
        write_trace_csv(partial / "trace_mstat.csv", mstat.trace);
        if (progress) progress("attack", "mstat done");
        auto pgd = pgd_baseline(fakes, source, cfg.attack);
        auto fgsm = fgsm_baseline(fakes, source, cfg.attack);
        methods = {{"stat", std::move(stat.advs)},
                   {"mstat", std::move(mstat.advs)},
                   {"pgd", std::move(pgd)},
                   {"fgsm", std::move(fgsm)}};
    });

    run_stage("evaluate", progress, [&] {
        report.transfer = evaluate_transfer(zoo[0].name, methods, targets, fakes);
        report.stat_white_box = report.transfer.at("stat", zoo[0].name);
        report.mstat_white_box = report.transfer.at("mstat", zoo[0].name);
        for (const auto& m : methods) {
            report.quality.push_back({m.method, mean_quality(fakes, m.advs)});
            report.statistics.push_back(set_statistics(m.method, m.advs));
        }
        report.sweep = mmd_blur_sweep(fakes, reals, source, cfg.sweep_sigmas, cfg.attack.kernel_size);
    });

    if (cfg.ablation) {
        run_stage("ablation", progress, [&] {
            AttackConfig single = cfg.attack;
            single.layers = 1;
            report.ablation = ablation_single_pattern(fakes, reals, source, targets, single);
            for (const auto& row : report.ablation.rows) {
                report.statistics.push_back(set_statistics(row.pattern, row.result.advs));
            }
        });
    }

    run_stage("report", progress, [&] {
        report.spectra = {{"real", radial_power_spectrum(reals)}, {"fake", radial_power_spectrum(fakes)}};
        report.histograms = {{"real", brightness_histogram(reals)}, {"fake", brightness_histogram(fakes)}};
        for (const auto& m : methods) {
            if (m.method == "stat") {
                report.spectra.push_back({"stat", radial_power_spectrum(m.advs)});
                report.histograms.push_back({"stat", brightness_histogram(m.advs)});
            }
        }
        for (const auto& row : report.ablation.rows) {
            if (row.pattern == "only_blur") report.spectra.push_back({row.pattern, radial_power_spectrum(row.result.advs)});
            if (row.pattern == "only_exposure") {
                report.histograms.push_back({row.pattern, brightness_histogram(row.result.advs)});
            }
        }
        write_report(report, partial);
        fs::rename(partial, final_dir);
    });
    return report;
}

}  // namespace statconsist
