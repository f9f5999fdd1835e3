#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "statconsist/attack.hpp"
#include "statconsist/degradations.hpp"
#include "statconsist/detector.hpp"
#include "statconsist/evaluation.hpp"
#include "statconsist/mmd.hpp"
#include "statconsist/statx.hpp"
#include "statconsist/synth.hpp"

namespace py = pybind11;
using namespace statconsist;
using nlohmann::json;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
    Shape shape(a.shape(), a.shape() + a.ndim());
    return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    Array out(shape);
    std::copy(t.values().begin(), t.values().end(), out.mutable_data());
    return out;
}

Image to_image(const Array& a, Provenance p = Provenance::fake) {
    if (a.ndim() != 3) throw ShapeError("images must be [H,W,C] arrays");
    return Image(to_tensor(a), p);
}

std::vector<Image> to_images(const std::vector<Array>& xs, Provenance p = Provenance::fake) {
    std::vector<Image> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(to_image(x, p));
    return out;
}

std::vector<Array> to_arrays(const std::vector<Image>& imgs) {
    std::vector<Array> out;
    out.reserve(imgs.size());
    for (const auto& i : imgs) out.push_back(to_array(i.pixels));
    return out;
}

// Python values cross the boundary as JSON text.
json from_py(const py::handle& obj) {
    if (obj.is_none()) return json::object();
    auto dumps = py::module_::import("json").attr("dumps");
    return json::parse(dumps(obj).cast<std::string>());
}

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

CorpusSpec corpus_spec(const py::object& spec) {
    CorpusSpec s;
    json j = json(s);
    json user = from_py(spec);
    for (auto& [k, v] : user.items()) {
        if (!j.contains(k)) throw std::invalid_argument("unknown corpus key: " + k);
        j[k] = v;
    }
    s = j.get<CorpusSpec>();
    s.validate();
    return s;
}

AttackConfig attack_config(const py::object& options, std::size_t default_layers) {
    json j = from_py(options);
    json wrapped{{"attack", j}};
    if (!j.contains("layers")) wrapped["attack"]["layers"] = std::max<std::size_t>(default_layers, 2);
    std::size_t threads = 1;
    if (j.contains("threads")) {
        threads = j.at("threads").get<std::size_t>();
        wrapped["attack"].erase("threads");
    }
    std::size_t layers = wrapped["attack"].at("layers").get<std::size_t>();
    if (layers < 2) wrapped["attack"]["layers"] = 2;
    AttackConfig cfg = experiment_config_from_json(wrapped).attack;
    cfg.layers = layers;
    cfg.threads = threads;
    return cfg;
}

py::dict train_report_dict(const TrainReport& r) {
    py::dict d;
    d["epoch_loss"] = r.epoch_loss;
    d["train_accuracy"] = r.train_accuracy;
    d["heldout_accuracy"] = r.heldout_accuracy;
    d["train_count"] = r.train_count;
    d["heldout_count"] = r.heldout_count;
    d["seconds"] = r.seconds;
    return d;
}

py::tuple attack_tuple(const AttackResult& r) {
    py::list trace;
    for (const auto& row : r.trace) {
        py::dict d;
        d["iter"] = row.iter;
        d["loss"] = row.loss;
        d["mmd2"] = row.mmd2;
        d["smooth_term"] = row.smooth_term;
        trace.append(d);
    }
    return py::make_tuple(to_arrays(r.advs), trace, to_py(params_to_json(r.params)));
}

}  // namespace

PYBIND11_MODULE(_statconsist, m) {
    m.doc() = "Statistical-consistency attacks on synthetic-image detectors";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.def(
        "gen_real", [](const py::object& spec, std::size_t index) { return to_array(gen_real(corpus_spec(spec), index).pixels); },
        py::arg("spec") = py::none(), py::arg("index") = 0);
    m.def(
        "gen_fake", [](const py::object& spec, std::size_t index) { return to_array(gen_fake(corpus_spec(spec), index).pixels); },
        py::arg("spec") = py::none(), py::arg("index") = 0);
    m.def(
        "generate_corpus",
        [](const py::object& spec, std::size_t first_index) {
            Corpus c = generate_corpus(corpus_spec(spec), first_index);
            return py::make_tuple(to_arrays(c.reals), to_arrays(c.fakes));
        },
        py::arg("spec") = py::none(), py::arg("first_index") = 0, "Returns (reals, fakes).");
    m.def(
        "write_corpus",
        [](const py::object& spec, const std::filesystem::path& out) {
            return write_corpus(corpus_spec(spec), out).entries.size();
        },
        py::arg("spec"), py::arg("out"));

    m.def(
        "exposure_field",
        [](const Array& a, const Array& phi, int degree, std::size_t h, std::size_t w) {
            ExposureParams p{to_tensor(a), to_tensor(phi), degree};
            return to_array(exposure_field(p, h, w));
        },
        py::arg("a"), py::arg("phi"), py::arg("degree") = 11, py::arg("height"), py::arg("width"));
    m.def(
        "apply_exposure",
        [](const Array& x, const Array& a, const Array& phi, int degree) {
            ExposureParams p{to_tensor(a), to_tensor(phi), degree};
            return to_array(apply_exposure(to_image(x), p).pixels);
        },
        py::arg("x"), py::arg("a"), py::arg("phi"), py::arg("degree") = 11);
    m.def(
        "apply_blur",
        [](const Array& x, const Array& sigma_map, std::size_t kernel_size) {
            BlurParams p{to_tensor(sigma_map), kernel_size};
            return to_array(apply_blur(to_image(x), p).pixels);
        },
        py::arg("x"), py::arg("sigma_map"), py::arg("kernel_size") = 3);
    m.def(
        "apply_noise",
        [](const Array& x, const Array& noise) {
            NoiseParams p{to_tensor(noise)};
            return to_array(apply_noise(to_image(x), p).pixels);
        },
        py::arg("x"), py::arg("noise"));
    m.def(
        "gaussian_kernel", [](double sigma, std::size_t radius) { return to_array(gaussian_kernel(sigma, radius)); },
        py::arg("sigma"), py::arg("radius"));
    m.def("exposure_coefficient_count", &exposure_coefficient_count, py::arg("degree"));

    m.def(
        "mmd2",
        [](const Array& x, const Array& y, std::vector<double> bandwidths) {
            return mmd2(FeatureBatch{to_tensor(x)}, FeatureBatch{to_tensor(y)}, bandwidths);
        },
        py::arg("x"), py::arg("y"), py::arg("bandwidths"));
    m.def(
        "median_heuristic",
        [](const Array& x, const Array& y) { return median_heuristic(FeatureBatch{to_tensor(x)}, FeatureBatch{to_tensor(y)}); },
        py::arg("x"), py::arg("y"));
    m.def("bandwidth_ladder", &bandwidth_ladder, py::arg("median"));

    py::class_<Detector>(m, "Detector")
        .def(py::init([](const std::string& kind, std::size_t input_size, std::uint64_t seed,
                         std::vector<std::size_t> conv_channels, std::size_t hidden) {
                 DetectorSpec s;
                 s.kind = parse_detector_kind(kind);
                 s.input_size = input_size;
                 s.seed = seed;
                 s.conv_channels = std::move(conv_channels);
                 s.hidden = hidden;
                 return Detector(s);
             }),
             py::arg("kind") = "spatial_cnn", py::arg("input_size") = 64, py::arg("seed") = 0,
             py::arg("conv_channels") = std::vector<std::size_t>{8, 16, 32}, py::arg("hidden") = 32)
        .def_property_readonly("kind", [](const Detector& d) { return to_string(d.spec().kind); })
        .def_property_readonly("input_size", [](const Detector& d) { return d.spec().input_size; })
        .def_property_readonly("trained", &Detector::trained)
        .def(
            "train",
            [](Detector& d, const std::vector<Array>& reals, const std::vector<Array>& fakes, std::size_t epochs,
               double lr, std::size_t batch, std::uint64_t seed) {
                TrainConfig tc;
                tc.epochs = epochs;
                tc.lr = lr;
                tc.batch = batch;
                tc.seed = seed;
                auto data = LabeledImages::from(to_images(reals, Provenance::real), to_images(fakes, Provenance::fake));
                TrainReport r;
                {
                    py::gil_scoped_release nogil;
                    r = train(d, data, tc);
                }
                return train_report_dict(r);
            },
            py::arg("reals"), py::arg("fakes"), py::arg("epochs") = 12, py::arg("lr") = 0.01, py::arg("batch") = 32,
            py::arg("seed") = 0)
        .def("predict", [](const Detector& d, const std::vector<Array>& xs) { return d.predict(to_images(xs)); })
        .def("logits", [](const Detector& d, const std::vector<Array>& xs) { return to_array(d.logits(to_images(xs))); })
        .def("features",
             [](const Detector& d, const std::vector<Array>& xs) { return to_array(d.features(to_images(xs))); })
        .def("save", &Detector::save, py::arg("dir"))
        .def_static("load", &Detector::load, py::arg("dir"));

    m.def(
        "stat_attack",
        [](const std::vector<Array>& fakes, const std::vector<Array>& reals, const Detector& d, const py::object& opts) {
            AttackConfig cfg = attack_config(opts, 1);
            cfg.layers = 1;
            auto f = to_images(fakes);
            auto r = to_images(reals, Provenance::real);
            AttackResult res;
            {
                py::gil_scoped_release nogil;
                res = stat_attack(f, r, d, cfg);
            }
            return attack_tuple(res);
        },
        py::arg("fakes"), py::arg("reals"), py::arg("detector"), py::arg("options") = py::none(),
        "Returns (advs, trace, params).");
    m.def(
        "mstat_attack",
        [](const std::vector<Array>& fakes, const std::vector<Array>& reals, const Detector& d, const py::object& opts) {
            AttackConfig cfg = attack_config(opts, 3);
            auto f = to_images(fakes);
            auto r = to_images(reals, Provenance::real);
            AttackResult res;
            {
                py::gil_scoped_release nogil;
                res = mstat_attack(f, r, d, cfg);
            }
            return attack_tuple(res);
        },
        py::arg("fakes"), py::arg("reals"), py::arg("detector"), py::arg("options") = py::none(),
        "Returns (advs, trace, params).");
    m.def(
        "pgd_baseline",
        [](const std::vector<Array>& fakes, const Detector& d, const py::object& opts) {
            return to_arrays(pgd_baseline(to_images(fakes), d, attack_config(opts, 1)));
        },
        py::arg("fakes"), py::arg("detector"), py::arg("options") = py::none());
    m.def(
        "fgsm_baseline",
        [](const std::vector<Array>& fakes, const Detector& d, const py::object& opts) {
            return to_arrays(fgsm_baseline(to_images(fakes), d, attack_config(opts, 1)));
        },
        py::arg("fakes"), py::arg("detector"), py::arg("options") = py::none());

    m.def(
        "brightness_histogram", [](const std::vector<Array>& xs) { return brightness_histogram(to_images(xs)); },
        py::arg("images"));
    m.def(
        "exposure_tail_mass",
        [](const std::vector<Array>& xs, double lo, double hi) { return exposure_tail_mass(to_images(xs), lo, hi); },
        py::arg("images"), py::arg("lo") = 0.02, py::arg("hi") = 0.98);
    m.def(
        "radial_power_spectrum",
        [](const std::vector<Array>& xs) {
            auto p = radial_power_spectrum(to_images(xs));
            return py::make_tuple(p.frequency, p.mean_log_power);
        },
        py::arg("images"), "Returns (frequency, mean_log_power).");
    m.def(
        "high_frequency_log_power",
        [](const std::vector<Array>& xs) { return high_frequency_log_power(radial_power_spectrum(to_images(xs))); },
        py::arg("images"));
    m.def(
        "spectral_peaks",
        [](const std::vector<Array>& xs, double threshold) {
            PeakOptions opt;
            opt.threshold = threshold;
            py::list out;
            for (const auto& p : spectral_peak_report(to_images(xs), opt)) out.append(py::make_tuple(p.fy, p.fx, p.strength));
            return out;
        },
        py::arg("images"), py::arg("threshold") = 10.0, "Returns [(fy, fx, strength)].");
    m.def(
        "quality_proxies",
        [](const Array& a, const Array& b) {
            auto q = quality_proxies(to_image(a), to_image(b));
            py::dict d;
            d["linf"] = q.linf;
            d["l2"] = q.l2;
            d["spectral_dist"] = q.spectral_dist;
            return d;
        },
        py::arg("original"), py::arg("adversarial"));
    m.def(
        "attack_success",
        [](const Detector& d, const std::vector<Array>& originals, const std::vector<Array>& advs) {
            auto c = attack_success(d, to_images(originals), to_images(advs));
            return py::make_tuple(c.asr, c.successes, c.denominator);
        },
        py::arg("detector"), py::arg("originals"), py::arg("advs"), "Returns (asr, successes, denominator).");

    m.def(
        "full_experiment",
        [](const py::object& config, const std::filesystem::path& root) {
            ExperimentConfig cfg = experiment_config_from_json(from_py(config));
            ExperimentReport r;
            {
                py::gil_scoped_release nogil;
                r = full_experiment(cfg, root);
            }
            return to_py(to_json(r));
        },
        py::arg("config"), py::arg("root"), "Runs the whole pipeline; writes root/report and returns the report.");
    m.def(
        "default_config", [] { return to_py(to_json(ExperimentConfig{})); },
        "Default experiment configuration as a dict.");
    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release nogil;
                code = cli::run(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs a CLI command in-process; returns (exit_code, stdout, stderr).");
}
