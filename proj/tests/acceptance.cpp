// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance [--work DIR] [--only 1,3,...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "statconsist/degradations.hpp"
#include "statconsist/evaluation.hpp"
#include "statconsist/mmd.hpp"
#include "support.hpp"

using namespace statconsist;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---- 1: gradient integrity ---------------------------------------------------

Outcome gradient_integrity() {
    auto t0 = Clock::now();
    std::mt19937_64 rng(20240601);
    const int n = 50;
    const std::size_t h = 10, w = 10, c = 3;
    std::map<std::string, double> worst;
    auto record = [&](const std::string& name, double e) { worst[name] = std::max(worst[name], e); };

    for (int i = 0; i < n; ++i) {
        Tensor x = testing::uniform(rng, {h, w, c}, 0.2, 0.6);
        Tensor a = testing::uniform(rng, {78}, -0.005, 0.005);
        Tensor phi = testing::uniform(rng, {5, 5, 2}, -0.1, 0.1);
        Tensor sigma = testing::uniform(rng, {h, w}, 0.3, 2.0);
        Tensor noise = testing::uniform(rng, {h, w, c}, -0.03, 0.03);
        std::uint64_t seed = rng();
        auto proj = [seed](const ad::Var& y) { return testing::project(y, seed); };

        record("exposure", testing::check_gradients(
                               [&](auto& v) { return proj(ad::apply_exposure(v[0], v[1], v[2], 11)); }, {x, a, phi},
                               rng)
                               .rel_error);
        record("blur", testing::check_gradients([&](auto& v) { return proj(ad::apply_blur(v[0], v[1], 3)); },
                                                {x, sigma}, rng)
                           .rel_error);
        record("noise", testing::check_gradients([&](auto& v) { return proj(ad::apply_noise(v[0], v[1])); },
                                                 {x, noise}, rng)
                            .rel_error);
        record("chain", testing::check_gradients(
                            [&](auto& v) {
                                ad::ChainVars p{v[1], v[2], v[3], v[4]};
                                return proj(ad::apply_chain(v[0], p));
                            },
                            {x, a, phi, sigma, noise}, rng)
                            .rel_error);

        std::size_t rows = testing::pick(rng, 2, 8), cols = testing::pick(rng, 2, 8), f = testing::pick(rng, 2, 16);
        Tensor fx = testing::uniform(rng, {rows, f}, -1, 1), fy = testing::uniform(rng, {cols, f}, -1, 1);
        auto bw = bandwidth_ladder(median_heuristic({fx}, {fy}));
        record("mmd", testing::check_gradients([&](auto& v) { return ad::mmd2(v[0], v[1], bw); }, {fx, fy}, rng)
                          .rel_error);
    }

    for (auto kind : {DetectorKind::spatial_cnn, DetectorKind::dct_freq, DetectorKind::fft_freq}) {
        DetectorSpec s;
        s.kind = kind;
        s.input_size = 64;
        s.seed = 77;
        Detector d(s);
        for (int i = 0; i < n; ++i) {
            Tensor img = testing::uniform(rng, {1, 64, 64, 3}, 0.05, 0.95);
            int label = i % 2;
            auto r = testing::check_gradients(
                [&](auto& v) { return ad::softmax_cross_entropy(d.forward(v[0]).logits, {label}); }, {img}, rng, 16);
            record("detector_" + to_string(kind), r.rel_error);
        }
    }

    double secs = seconds_since(t0);
    bool ok = secs < 120.0;
    std::ostringstream os;
    os << n << " instances each;";
    for (const auto& [name, e] : worst) {
        ok = ok && e < 1e-4;
        os << " " << name << "=" << fmt("%.1e", e);
    }
    os << "; " << fmt("%.1f", secs) << " s";
    return {ok, os.str()};
}

// ---- 2-8: one default-scale experiment in penalty mode ----------------------

struct Experiment {
    ExperimentConfig cfg;
    ExperimentReport report;
    fs::path dir;
    double seconds = 0.0;
};

const SetStatistics* find_set(const ExperimentReport& r, const std::string& name) {
    for (const auto& s : r.statistics)
        if (s.set == name) return &s;
    return nullptr;
}

Outcome detector_regime(const Experiment& e) {
    bool ok = true;
    std::ostringstream os;
    for (const auto& d : e.report.detectors) {
        ok = ok && d.training.heldout_accuracy >= 0.95 && d.training.seconds <= 300.0;
        os << d.name << " " << fmt("%.3f", d.training.heldout_accuracy) << " (" << fmt("%.0f", d.training.seconds)
           << " s, n=" << d.training.heldout_count << "); ";
    }
    return {ok && e.report.detectors.size() == 4, os.str()};
}

Outcome white_box(const Experiment& e) {
    double stat = e.report.stat_white_box, mstat = e.report.mstat_white_box;
    const auto& m = e.report.transfer;
    std::size_t den = m.denominators[0][0];
    bool ok = stat >= 0.90 && mstat >= stat - 0.02 && m.source == "spatial_cnn_a" &&
              e.cfg.attack.smoothness_sign == SmoothnessSign::penalty && e.cfg.attack.iterations == 40 &&
              e.cfg.attack.layers == 3 && e.cfg.attack.batch == 30;
    std::string sign = mstat > stat ? "exceeds" : (mstat == stat ? "equals" : "below");
    return {ok, "stat " + fmt("%.3f", stat) + ", mstat " + fmt("%.3f", mstat) + " (" + sign + " stat), n=" +
                    std::to_string(den)};
}

Outcome transfer(const Experiment& e) {
    const auto& m = e.report.transfer;
    bool ok = true;
    std::ostringstream os;
    auto mi = [&](const std::string& s) {
        return static_cast<std::size_t>(std::find(m.methods.begin(), m.methods.end(), s) - m.methods.begin());
    };
    for (std::size_t t = 0; t < m.targets.size(); ++t) {
        if (m.targets[t] == m.source) continue;
        double s = m.asr[mi("stat")][t], p = m.asr[mi("pgd")][t];
        std::size_t ns = m.denominators[mi("stat")][t], np = m.denominators[mi("pgd")][t];
        bool cell = s > p && ns >= 200 && np >= 200;
        ok = ok && cell;
        os << m.targets[t] << " stat " << fmt("%.3f", s) << " vs pgd " << fmt("%.3f", p) << " (n=" << ns << ")"
           << (cell ? "" : " x") << "; ";
    }
    return {ok, os.str()};
}

Outcome sweep(const Experiment& e) {
    const auto& s = e.report.sweep;
    bool ok = s.size() == 4;
    std::ostringstream os;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i > 0) ok = ok && s[i].mmd2 < s[i - 1].mmd2;
        os << fmt("%g", s[i].sigma) << ":" << fmt("%.4g", s[i].mmd2) << " ";
    }
    ok = ok && s.back().mmd2 <= 0.5 * s.front().mmd2 && s.front().sigma == 0.0 && s.back().sigma == 2.0;
    return {ok, os.str()};
}

Outcome statistics(const Experiment& e) {
    const auto& r = e.report;
    auto real = find_set(r, "real"), fake = find_set(r, "fake");
    auto blur = find_set(r, "only_blur"), noise = find_set(r, "only_noise"), expo = find_set(r, "only_exposure");
    if (!real || !fake || !blur || !noise || !expo) return {false, "missing statistics sets"};

    bool tail = fake->tail_mass < 0.1 * real->tail_mass;
    double hf_ratio = std::exp(fake->high_frequency - real->high_frequency);
    bool hf = hf_ratio >= 1.5;
    bool peaks = fake->peak_count > 0 && fake->max_peak_strength >= 10.0 && real->peak_count == 0;
    double gap = fake->high_frequency - real->high_frequency;
    double closed = gap > 0 ? (fake->high_frequency - blur->high_frequency) / gap : 0.0;
    bool blur_ok = closed >= 0.5;
    bool noise_ok = noise->peak_count == 0;
    bool expo_ok = expo->tail_mass >= 0.5 * real->tail_mass;

    std::ostringstream os;
    os << "tail fake/real " << fmt("%.4f", fake->tail_mass) << "/" << fmt("%.4f", real->tail_mass)
       << ", hf ratio " << fmt("%.2f", hf_ratio) << ", peaks " << fake->peak_count << " @ "
       << fmt("%.1f", fake->max_peak_strength) << "x; only_blur closes " << fmt("%.0f%%", 100 * closed)
       << ", only_noise peaks " << noise->peak_count << ", only_exposure tail " << fmt("%.3f", expo->tail_mass);
    return {tail && hf && peaks && blur_ok && noise_ok && expo_ok, os.str()};
}

Outcome constraints(const Experiment& e) {
    const auto& c = e.report.constraints;
    std::size_t batches = (e.cfg.attack_images + e.cfg.attack.batch - 1) / e.cfg.attack.batch;
    std::size_t expected = 2 * batches * e.cfg.attack.iterations;
    bool ok = c.max_noise_linf <= 8.0 / 255.0 && c.max_weight_sum_error <= 1e-12 && c.checks == expected;
    return {ok, "max |N_a| " + fmt("%.6f", c.max_noise_linf) + " (eps " + fmt("%.6f", 8.0 / 255.0) +
                    "), max |sum w - 1| " + fmt("%.1e", c.max_weight_sum_error) + ", " + std::to_string(c.checks) +
                    " iteration checks"};
}

Outcome ablation(const Experiment& e) {
    const auto& t = e.report.ablation;
    bool ok = t.rows.size() == 6 && t.targets.size() == 4 && fs::exists(e.dir / "report" / "ablation.csv");
    std::ostringstream os;
    bool frozen = false;
    for (const auto& row : t.rows) {
        ok = ok && row.asr.size() == t.targets.size();
        os << row.pattern << " " << fmt("%.2f", row.asr.empty() ? 0.0 : row.asr[0]) << " ";
        if (row.pattern == "only_blur") {
            frozen = !row.result.params.empty();
            for (const auto& bp : row.result.params)
                for (const auto& l : bp.layers)
                    frozen = frozen && l.exposure.a.max_abs() == 0.0 && l.exposure.phi.max_abs() == 0.0 &&
                             l.noise.noise_map.max_abs() == 0.0;
        }
    }
    os << "(source ASR); only_blur frozen " << (frozen ? "yes" : "no");
    return {ok && frozen, os.str()};
}

// ---- 9: determinism --------------------------------------------------------

std::map<std::string, std::string> csv_files(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.path().extension() != ".csv") continue;
        std::ifstream is(entry.path(), std::ios::binary);
        out[fs::relative(entry.path(), dir).string()] = {std::istreambuf_iterator<char>(is), {}};
    }
    return out;
}

Outcome determinism(const fs::path& work) {
    std::vector<std::map<std::string, std::string>> runs;
    for (const char* name : {"seed7_a", "seed7_b"}) {
        std::ostringstream out, err;
        int code = cli::run({"run-all", "--seed", "7", "--out", (work / "determinism").string(), "--run-name", name},
                            out, err);
        if (code != 0) return {false, std::string("run-all exited with ") + std::to_string(code) + ": " + err.str()};
        runs.push_back(csv_files(work / "determinism" / name / "report"));
    }
    std::size_t differing = 0;
    for (const auto& [k, v] : runs[0]) {
        auto it = runs[1].find(k);
        if (it == runs[1].end() || it->second != v) ++differing;
    }
    bool ok = !runs[0].empty() && runs[0].size() == runs[1].size() && differing == 0;
    return {ok, std::to_string(runs[0].size()) + " CSV files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
    fs::path work = fs::temp_directory_path() / "statconsist_acceptance";
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--work" && i + 1 < argc) {
            work = argv[++i];
        } else if (a == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            std::string item;
            while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
        } else {
            std::cerr << "usage: acceptance [--work DIR] [--only 1,2,...]\n";
            return 2;
        }
    }
    auto wanted = [&](int k) { return only.empty() || only.count(k) > 0; };
    fs::remove_all(work);
    fs::create_directories(work);

    std::map<int, Outcome> results;
    auto run = [&](int k, const std::function<Outcome()>& fn) {
        if (!wanted(k)) return;
        try {
            results[k] = fn();
        } catch (const std::exception& ex) {
            results[k] = {false, std::string("error: ") + ex.what()};
        }
    };

    run(1, gradient_integrity);

    bool need_experiment = false;
    for (int k = 2; k <= 8; ++k) need_experiment = need_experiment || wanted(k);
    if (need_experiment) {
        std::optional<Experiment> exp;
        std::string failure;
        try {
            Experiment e;
            e.cfg = experiment_config_from_json(
                nlohmann::json::parse(R"({"seed": 7, "attack": {"smoothness_sign": "penalty"}})"));
            e.dir = work / "experiment";
            auto t0 = Clock::now();
            e.report = full_experiment(e.cfg, e.dir, [&](const std::string& stage, const std::string& msg) {
                std::cerr << "[" << fmt("%7.1f", seconds_since(t0)) << " s] " << stage << ": " << msg << "\n";
            });
            e.seconds = seconds_since(t0);
            exp = std::move(e);
        } catch (const std::exception& ex) {
            failure = ex.what();
        }
        std::vector<std::pair<int, Outcome (*)(const Experiment&)>> checks{
            {2, detector_regime}, {3, white_box},   {4, transfer}, {5, sweep},
            {6, statistics},      {7, constraints}, {8, ablation}};
        for (auto [k, fn] : checks) {
            if (!wanted(k)) continue;
            if (!exp) {
                results[k] = {false, "experiment failed: " + failure};
                continue;
            }
            run(k, [&, fn = fn] { return fn(*exp); });
        }
        if (exp) std::cerr << "default experiment wall time " << fmt("%.0f", exp->seconds) << " s\n";
    }

    run(9, [&] { return determinism(work); });

    static const char* names[] = {"",
                                  "gradient integrity",
                                  "detector regime",
                                  "white-box regime",
                                  "transfer superiority",
                                  "MMD blur sweep",
                                  "image statistics",
                                  "constraint exactness",
                                  "ablation protocol",
                                  "determinism"};
    int failed = 0;
    for (const auto& [k, o] : results) {
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << k << "] " << names[k] << ": " << o.detail << std::endl;
        failed += !o.pass;
    }
    std::cout << results.size() - failed << "/" << results.size() << " criteria passed" << std::endl;
    return failed ? 1 : 0;
}
