#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "statconsist/attack.hpp"
#include "statconsist/detector.hpp"
#include "statconsist/evaluation.hpp"
#include "statconsist/png_io.hpp"
#include "statconsist/synth.hpp"

namespace statconsist::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

struct Logger {
    std::ostream* err = nullptr;
    Level level = Level::info;

    void log(Level l, const std::string& msg) const {
        if (l > level) return;
        static const char* names[] = {"error", "warn", "info", "debug"};
        *err << "[" << names[static_cast<int>(l)] << "] " << msg << "\n";
    }
    void info(const std::string& msg) const { log(Level::info, msg); }
    void debug(const std::string& msg) const { log(Level::debug, msg); }
};

Level parse_level(const std::string& s) {
    if (s == "error") return Level::error;
    if (s == "warn") return Level::warn;
    if (s == "info") return Level::info;
    if (s == "debug") return Level::debug;
    throw UsageError("--log-level must be one of error, warn, info, debug");
}

std::size_t resolve_threads(long flag) {
    if (flag > 0) return static_cast<std::size_t>(flag);
    if (flag == 0) throw UsageError("--threads must be positive");
    if (const char* env = std::getenv("STATCONSIST_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v <= 0) {
            throw UsageError(std::string("STATCONSIST_THREADS must be a positive integer, got '") + env + "'");
        }
        return static_cast<std::size_t>(v);
    }
    return 1;
}

std::string utc_stamp(const char* fmt) {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, fmt);
    return os.str();
}

struct RunManifest {
    std::string subcommand;
    std::vector<std::string> args;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    json outputs = json::object();
    std::string started = utc_stamp("%Y-%m-%dT%H:%M:%SZ");
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    void write(const fs::path& dir, const std::string& status, const std::string& error = {}) const {
        fs::create_directories(dir);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        json j{{"tool", "statconsist"},
               {"subcommand", subcommand},
               {"args", args},
               {"seed", seed},
               {"threads", threads},
               {"started", started},
               {"duration_s", secs},
               {"status", status},
               {"outputs", outputs}};
        if (!error.empty()) j["error"] = error;
        std::ofstream os(dir / "run_manifest.json");
        os << j.dump(2) << "\n";
    }
};

struct Corpusish {
    std::vector<Image> reals;
    std::vector<Image> fakes;
    bool is_corpus = false;
};

// A corpus directory (with manifest.json) or a flat directory of PNGs.
Corpusish load_images(const fs::path& dir, Provenance flat_label) {
    Corpusish c;
    if (fs::exists(dir / "manifest.json")) {
        Corpus corpus = load_corpus(dir);
        c.reals = std::move(corpus.reals);
        c.fakes = std::move(corpus.fakes);
        c.is_corpus = true;
    } else {
        auto imgs = load_image_dir(dir, flat_label);
        if (imgs.empty()) throw std::runtime_error("no PNG images in " + dir.string());
        (flat_label == Provenance::real ? c.reals : c.fakes) = std::move(imgs);
    }
    return c;
}

void write_images(const fs::path& dir, const std::vector<Image>& imgs, const char* prefix) {
    fs::create_directories(dir);
    char name[64];
    for (std::size_t i = 0; i < imgs.size(); ++i) {
        std::snprintf(name, sizeof name, "%s_%05zu.png", prefix, i);
        png_write(dir / name, imgs[i]);
    }
}

void write_json(const fs::path& p, const json& j) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << j.dump(2) << "\n";
}

std::pair<std::string, std::string> split_assignment(const std::string& s, const char* flag) {
    auto eq = s.find('=');
    if (eq == std::string::npos) {
        fs::path p(s);
        std::string name = p.filename().string();
        if (name.empty()) name = p.parent_path().filename().string();
        return {name, s};
    }
    if (eq == 0 || eq + 1 == s.size()) throw UsageError(std::string(flag) + " expects name=path, got '" + s + "'");
    return {s.substr(0, eq), s.substr(eq + 1)};
}

struct Globals {
    long threads = -1;
    std::string log_level = "info";
};

struct SynthOpts {
    std::size_t n = 500, size = 64;
    std::uint64_t seed = 0;
    std::string out;
};

struct TrainOpts {
    std::string kind = "spatial_cnn";
    std::size_t size = 64, epochs = 12, batch = 32;
    double lr = 0.01;
    std::uint64_t seed = 0;
    std::string data, out;
};

struct AttackOpts {
    std::string method, detector, data, reals, eps = "8/255", smoothness = "as_printed", out;
    std::size_t iters = 40, layers = 0, batch = 30;
    std::uint64_t seed = 0;
    bool per_image = false;
};

struct EvalOpts {
    std::vector<std::string> detectors, advs;
    std::string originals, source, out;
};

struct AnalyzeOpts {
    std::string data, out;
};

struct RunAllOpts {
    std::string config, out, run_name, smoothness;
    std::uint64_t seed = 0;
    std::size_t n = 0, attack_images = 0, epochs = 0, iters = 0;
    bool no_ablation = false;
};

int do_synth(const SynthOpts& o, const Globals& g, const Logger& log, RunManifest& m) {
    CorpusSpec spec;
    spec.n_per_class = o.n;
    spec.size = o.size;
    spec.seed = o.seed;
    spec.validate();
    m.seed = o.seed;
    m.threads = resolve_threads(g.threads);
    log.info("generating " + std::to_string(2 * o.n) + " images into " + o.out);
    Manifest man = write_corpus(spec, o.out);
    m.outputs["manifest"] = (fs::path(o.out) / "manifest.json").string();
    m.outputs["images"] = man.entries.size();
    m.outputs["checksum"] = man.checksum;
    return kExitOk;
}

int do_train(const TrainOpts& o, const Globals& g, const Logger& log, RunManifest& m) {
    DetectorSpec spec;
    spec.kind = parse_detector_kind(o.kind);
    spec.input_size = o.size;
    spec.seed = o.seed;
    spec.validate();
    m.seed = o.seed;
    m.threads = resolve_threads(g.threads);
    Corpus c = load_corpus(o.data);
    if (!c.reals.empty() && c.reals.front().height() != o.size) {
        throw std::runtime_error("--size " + std::to_string(o.size) + " does not match corpus images of size " +
                                 std::to_string(c.reals.front().height()));
    }
    TrainConfig tc;
    tc.epochs = o.epochs;
    tc.lr = o.lr;
    tc.batch = o.batch;
    tc.seed = o.seed;
    Detector d(spec);
    log.info("training " + o.kind + " on " + std::to_string(c.reals.size() + c.fakes.size()) + " images");
    TrainReport r = train(d, LabeledImages::from(c.reals, c.fakes), tc);
    d.save(o.out);
    json rep{{"kind", o.kind},
             {"seed", o.seed},
             {"epochs", o.epochs},
             {"train_accuracy", r.train_accuracy},
             {"heldout_accuracy", r.heldout_accuracy},
             {"heldout_count", r.heldout_count},
             {"epoch_loss", r.epoch_loss}};
    write_json(fs::path(o.out) / "train_report.json", rep);
    log.info("held-out accuracy " + std::to_string(r.heldout_accuracy));
    m.outputs["checkpoint"] = o.out;
    m.outputs["heldout_accuracy"] = r.heldout_accuracy;
    return kExitOk;
}

void check_attack_flags(const AttackOpts& o, const CLI::App& sub) {
    bool baseline = o.method == "pgd" || o.method == "fgsm";
    if (baseline && sub.count("--layers")) {
        throw UsageError("--method " + o.method + " conflicts with --layers: baseline attacks have no degradation layers");
    }
    if (baseline && sub.count("--smoothness-sign")) {
        throw UsageError("--method " + o.method + " conflicts with --smoothness-sign: baselines have no smoothness term");
    }
    if (o.method == "stat" && sub.count("--layers") && o.layers != 1) {
        throw UsageError("--method stat conflicts with --layers " + std::to_string(o.layers) +
                         ": use --method mstat for multi-layer attacks");
    }
    if (o.method == "mstat" && sub.count("--layers") && o.layers < 2) {
        throw UsageError("--method mstat conflicts with --layers " + std::to_string(o.layers) + ": needs at least 2");
    }
}

int do_attack(const AttackOpts& o, const Globals& g, const Logger& log, RunManifest& m) {
    AttackConfig cfg;
    cfg.iterations = o.iters;
    cfg.batch = o.batch;
    cfg.seed = o.seed;
    cfg.per_image = o.per_image;
    cfg.threads = resolve_threads(g.threads);
    try {
        cfg.epsilon = parse_fraction(o.eps);
        cfg.smoothness_sign = parse_smoothness_sign(o.smoothness);
        cfg.layers = o.method == "mstat" ? (o.layers ? o.layers : 3) : 1;
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    m.seed = o.seed;
    m.threads = cfg.threads;

    Detector det = Detector::load(o.detector);
    det.require_trained("attack");
    Corpusish data = load_images(o.data, Provenance::fake);
    if (data.fakes.empty()) throw std::runtime_error("no fake images found in " + o.data);
    const auto& fakes = data.fakes;

    fs::path out(o.out);
    fs::create_directories(out);
    std::vector<Image> advs;
    if (o.method == "stat" || o.method == "mstat") {
        std::vector<Image> reals;
        if (!o.reals.empty()) {
            Corpusish r = load_images(o.reals, Provenance::real);
            reals = std::move(r.reals);
        } else if (data.is_corpus) {
            reals = data.reals;
        }
        if (reals.empty()) throw UsageError("--method " + o.method + " needs --reals (or a corpus directory for --data)");
        log.info("running " + o.method + " on " + std::to_string(fakes.size()) + " fakes against " +
                 std::to_string(reals.size()) + " reals");
        AttackResult r = o.method == "stat" ? stat_attack(fakes, reals, det, cfg) : mstat_attack(fakes, reals, det, cfg);
        advs = std::move(r.advs);
        json params{{"method", o.method},
                    {"smoothness_sign", to_string(r.smoothness_sign)},
                    {"batches", params_to_json(r.params)}};
        write_json(out / "params.json", params);
        std::ofstream tr(out / "trace.csv");
        tr << "iter,loss,mmd2,smooth_term\n" << std::setprecision(10);
        for (const auto& row : r.trace) tr << row.iter << "," << row.loss << "," << row.mmd2 << "," << row.smooth_term << "\n";
        m.outputs["params"] = (out / "params.json").string();
        m.outputs["trace"] = (out / "trace.csv").string();
        m.outputs["smoothness_sign"] = to_string(r.smoothness_sign);
    } else {
        log.info("running " + o.method + " on " + std::to_string(fakes.size()) + " fakes");
        advs = o.method == "pgd" ? pgd_baseline(fakes, det, cfg) : fgsm_baseline(fakes, det, cfg);
    }
    write_images(out / "adv", advs, "adv");
    AsrCell wb = attack_success(det, fakes, advs);
    AsrCell wq = attack_success(det, fakes, quantize_images(advs));
    json summary{{"method", o.method},
                 {"images", advs.size()},
                 {"white_box_asr", wb.asr},
                 {"white_box_asr_quantized", wq.asr},
                 {"denominator", wb.denominator}};
    if (o.method == "stat" || o.method == "mstat") summary["smoothness_sign"] = to_string(cfg.smoothness_sign);
    write_json(out / "summary.json", summary);
    log.info("white-box ASR " + std::to_string(wb.asr) + " (quantized " + std::to_string(wq.asr) + ")");
    m.outputs["adversarial_dir"] = (out / "adv").string();
    m.outputs["white_box_asr"] = wb.asr;
    return kExitOk;
}

int do_eval(const EvalOpts& o, const Globals& g, const Logger& log, RunManifest& m) {
    m.threads = resolve_threads(g.threads);
    std::vector<std::pair<std::string, std::string>> det_paths, adv_paths;
    for (const auto& d : o.detectors) det_paths.push_back(split_assignment(d, "--detector"));
    for (const auto& a : o.advs) adv_paths.push_back(split_assignment(a, "--advs"));
    for (const auto& [name, path] : det_paths) {
        if (!fs::is_directory(path)) throw UsageError("--detector: no checkpoint directory " + path);
    }
    for (const auto& [name, path] : adv_paths) {
        if (!fs::is_directory(path)) throw UsageError("--advs: no directory " + path);
    }
    std::vector<Detector> dets;
    for (const auto& [name, path] : det_paths) dets.push_back(Detector::load(path));
    std::vector<NamedDetector> targets;
    for (std::size_t i = 0; i < dets.size(); ++i) targets.push_back({det_paths[i].first, &dets[i]});
    std::string source = o.source.empty() ? det_paths.front().first : o.source;

    Corpusish orig = load_images(o.originals, Provenance::fake);
    std::vector<MethodAdvs> methods;
    for (const auto& [name, path] : adv_paths) {
        fs::path dir = fs::is_directory(fs::path(path) / "adv") ? fs::path(path) / "adv" : fs::path(path);
        methods.push_back({name, load_image_dir(dir, Provenance::adversarial)});
    }
    log.info("evaluating " + std::to_string(methods.size()) + " methods on " + std::to_string(targets.size()) +
             " detectors");
    TransferMatrix tm = evaluate_transfer(source, methods, targets, orig.fakes);
    fs::create_directories(o.out);
    std::ofstream csv(fs::path(o.out) / "transfer.csv");
    csv << "source,method,target,denominator,asr,asr_quantized\n" << std::setprecision(10);
    for (std::size_t i = 0; i < tm.methods.size(); ++i) {
        for (std::size_t j = 0; j < tm.targets.size(); ++j) {
            csv << tm.source << "," << tm.methods[i] << "," << tm.targets[j] << "," << tm.denominators[i][j] << ","
                << tm.asr[i][j] << "," << tm.asr_quantized[i][j] << "\n";
        }
    }
    write_json(fs::path(o.out) / "transfer.json", json{{"source", tm.source},
                                                       {"methods", tm.methods},
                                                       {"targets", tm.targets},
                                                       {"asr", tm.asr},
                                                       {"asr_quantized", tm.asr_quantized},
                                                       {"denominators", tm.denominators}});
    m.outputs["transfer"] = (fs::path(o.out) / "transfer.csv").string();
    return kExitOk;
}

int do_analyze(const AnalyzeOpts& o, const Globals& g, const Logger& log, RunManifest& m) {
    m.threads = resolve_threads(g.threads);
    Corpusish c = load_images(o.data, Provenance::real);
    fs::path out(o.out);
    if (c.is_corpus) {
        write_analysis(c.reals, out / "real");
        write_analysis(c.fakes, out / "fake");
        m.outputs["real"] = (out / "real").string();
        m.outputs["fake"] = (out / "fake").string();
    } else {
        write_analysis(c.reals, out);
        m.outputs["analysis"] = out.string();
    }
    log.info("analysis written to " + out.string());
    return kExitOk;
}

int do_run_all(const RunAllOpts& o, const Globals& g, const CLI::App& sub, const Logger& log, RunManifest& m,
               fs::path& manifest_dir) {
    ExperimentConfig cfg;
    try {
        if (!o.config.empty()) {
            std::ifstream is(o.config);
            if (!is) throw UsageError("cannot read config file " + o.config);
            json j;
            try {
                j = json::parse(is);
            } catch (const json::parse_error& e) {
                throw UsageError("config file " + o.config + " is not valid JSON: " + e.what());
            }
            cfg = experiment_config_from_json(j);
        }
        if (sub.count("--seed")) cfg.seed = o.seed;
        if (o.n) cfg.corpus.n_per_class = o.n;
        if (o.attack_images) cfg.attack_images = o.attack_images;
        if (o.epochs) cfg.train.epochs = o.epochs;
        if (sub.count("--iters")) cfg.attack.iterations = o.iters;
        if (!o.smoothness.empty()) cfg.attack.smoothness_sign = parse_smoothness_sign(o.smoothness);
        if (o.no_ablation) cfg.ablation = false;
        cfg.threads = resolve_threads(g.threads);
        cfg.validate();
    } catch (const UsageError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("invalid config: ") + e.what());
    }
    m.seed = cfg.seed;
    m.threads = cfg.threads;
    std::string name = o.run_name.empty() ? "run-" + utc_stamp("%Y%m%dT%H%M%SZ") : o.run_name;
    fs::path root = fs::path(o.out) / name;
    manifest_dir = root;
    log.info("run-all into " + root.string() + " (seed " + std::to_string(cfg.seed) + ", smoothness " +
             to_string(cfg.attack.smoothness_sign) + ")");
    auto t0 = std::chrono::steady_clock::now();
    full_experiment(cfg, root, [&](const std::string& stage, const std::string& msg) {
        double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::ostringstream os;
        os << "[" << stage << "] " << msg << " (" << std::fixed << std::setprecision(1) << s << " s)";
        log.info(os.str());
    });
    m.outputs["report"] = (root / "report").string();
    m.outputs["smoothness_sign"] = to_string(cfg.attack.smoothness_sign);
    return kExitOk;
}

}  // namespace

double parse_fraction(const std::string& text) {
    auto parse = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != s.size() || s.empty()) throw std::invalid_argument("not a number: '" + text + "'");
        return v;
    };
    auto slash = text.find('/');
    if (slash == std::string::npos) return parse(text);
    double den = parse(text.substr(slash + 1));
    if (den == 0.0) throw std::invalid_argument("zero denominator in '" + text + "'");
    return parse(text.substr(0, slash)) / den;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"statconsist: statistical-consistency attacks on synthetic-image detectors"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");
    Globals g;
    app.add_option("--threads", g.threads, "Worker threads (default: $STATCONSIST_THREADS or 1)");
    app.add_option("--log-level", g.log_level, "error, warn, info or debug")->capture_default_str();

    SynthOpts so;
    auto* synth = app.add_subcommand("synth", "Generate the synthetic real/fake corpus");
    synth->fallthrough();
    synth->add_option("--n", so.n, "Images per class")->capture_default_str();
    synth->add_option("--size", so.size, "Image side length")->capture_default_str();
    synth->add_option("--seed", so.seed, "Corpus seed")->capture_default_str();
    synth->add_option("--out", so.out, "Output directory")->required();

    TrainOpts to;
    auto* trn = app.add_subcommand("train", "Train a detector on a corpus");
    trn->fallthrough();
    trn->add_option("--kind", to.kind, "spatial_cnn, dct_freq or fft_freq")
        ->check(CLI::IsMember({"spatial_cnn", "dct_freq", "fft_freq"}))
        ->capture_default_str();
    trn->add_option("--size", to.size, "Input side length")->check(CLI::IsMember({32, 64, 128}))->capture_default_str();
    trn->add_option("--epochs", to.epochs)->capture_default_str();
    trn->add_option("--lr", to.lr)->capture_default_str();
    trn->add_option("--batch", to.batch)->check(CLI::Range(2, 1 << 20))->capture_default_str();
    trn->add_option("--seed", to.seed)->capture_default_str();
    trn->add_option("--data", to.data, "Corpus directory")->required()->check(CLI::ExistingDirectory);
    trn->add_option("--out", to.out, "Checkpoint directory")->required();

    AttackOpts ao;
    auto* atk = app.add_subcommand("attack", "Craft adversarial fakes against a detector");
    atk->fallthrough();
    atk->add_option("--method", ao.method, "stat, mstat, pgd or fgsm")
        ->required()
        ->check(CLI::IsMember({"stat", "mstat", "pgd", "fgsm"}));
    atk->add_option("--detector", ao.detector, "Detector checkpoint directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    atk->add_option("--data", ao.data, "Corpus directory or directory of fake PNGs")
        ->required()
        ->check(CLI::ExistingDirectory);
    atk->add_option("--reals", ao.reals, "Corpus or PNG directory with real images")->check(CLI::ExistingDirectory);
    atk->add_option("--iters", ao.iters)->capture_default_str();
    atk->add_option("--eps", ao.eps, "Noise budget, e.g. 8/255")->capture_default_str();
    atk->add_option("--layers", ao.layers, "Degradation layers (mstat only, default 3)");
    atk->add_option("--batch", ao.batch)->check(CLI::PositiveNumber)->capture_default_str();
    atk->add_option("--seed", ao.seed)->capture_default_str();
    atk->add_option("--smoothness-sign", ao.smoothness, "as_printed or penalty")
        ->check(CLI::IsMember({"as_printed", "penalty"}))
        ->capture_default_str();
    atk->add_flag("--per-image", ao.per_image, "Optimize one parameter set per image");
    atk->add_option("--out", ao.out, "Output directory")->required();

    EvalOpts eo;
    auto* ev = app.add_subcommand("eval", "Transfer matrix of adversarial sets over detectors");
    ev->fallthrough();
    ev->add_option("--detector", eo.detectors, "name=checkpoint (repeatable)")->required();
    ev->add_option("--originals", eo.originals, "Corpus or PNG directory of the clean fakes")
        ->required()
        ->check(CLI::ExistingDirectory);
    ev->add_option("--advs", eo.advs, "method=directory (repeatable)")->required();
    ev->add_option("--source", eo.source, "Detector the attacks were crafted on");
    ev->add_option("--out", eo.out)->required();

    AnalyzeOpts no;
    auto* an = app.add_subcommand("analyze", "Histogram, spectrum and peak diagnostics");
    an->fallthrough();
    an->add_option("--data", no.data, "Corpus or PNG directory")->required()->check(CLI::ExistingDirectory);
    an->add_option("--out", no.out)->required();

    RunAllOpts ro;
    auto* ra = app.add_subcommand("run-all", "Synthesize, train, attack and report in one go");
    ra->fallthrough();
    ra->add_option("--config", ro.config, "Experiment configuration JSON")->check(CLI::ExistingFile);
    ra->add_option("--seed", ro.seed, "Master seed (overrides the config)");
    ra->add_option("--out", ro.out, "Output root; the run goes into a timestamped subdirectory")->required();
    ra->add_option("--run-name", ro.run_name, "Subdirectory name instead of the timestamp");
    ra->add_option("--n", ro.n, "Training images per class");
    ra->add_option("--attack-images", ro.attack_images, "Attack images per class");
    ra->add_option("--epochs", ro.epochs, "Training epochs");
    ra->add_option("--iters", ro.iters, "Attack iterations");
    ra->add_option("--smoothness-sign", ro.smoothness)->check(CLI::IsMember({"as_printed", "penalty"}));
    ra->add_flag("--no-ablation", ro.no_ablation, "Skip the single-pattern ablation");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    Logger log;
    log.err = &err;
    RunManifest manifest;
    manifest.args = args;
    fs::path manifest_dir;
    try {
        log.level = parse_level(g.log_level);
        if (*synth) {
            manifest.subcommand = "synth";
            manifest_dir = so.out;
            return (do_synth(so, g, log, manifest), manifest.write(manifest_dir, "ok"), kExitOk);
        }
        if (*trn) {
            manifest.subcommand = "train";
            manifest_dir = to.out;
            return (do_train(to, g, log, manifest), manifest.write(manifest_dir, "ok"), kExitOk);
        }
        if (*atk) {
            manifest.subcommand = "attack";
            check_attack_flags(ao, *atk);
            manifest_dir = ao.out;
            return (do_attack(ao, g, log, manifest), manifest.write(manifest_dir, "ok"), kExitOk);
        }
        if (*ev) {
            manifest.subcommand = "eval";
            manifest_dir = eo.out;
            return (do_eval(eo, g, log, manifest), manifest.write(manifest_dir, "ok"), kExitOk);
        }
        if (*an) {
            manifest.subcommand = "analyze";
            manifest_dir = no.out;
            return (do_analyze(no, g, log, manifest), manifest.write(manifest_dir, "ok"), kExitOk);
        }
        if (*ra) {
            manifest.subcommand = "run-all";
            do_run_all(ro, g, *ra, log, manifest, manifest_dir);
            manifest.write(manifest_dir, "ok");
            return kExitOk;
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        log.log(Level::error, e.what());
        if (!manifest_dir.empty()) {
            try {
                manifest.write(manifest_dir, "failed", e.what());
            } catch (const std::exception&) {
            }
        }
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace statconsist::cli
