import json

import numpy as np
import pytest

import statconsist as sc


def small_spec(n=6, seed=3):
    return {"n_per_class": n, "size": 32, "seed": seed}


def test_generators_are_deterministic():
    a = sc.gen_fake(small_spec(), 2)
    b = sc.gen_fake(small_spec(), 2)
    assert a.shape == (32, 32, 3)
    assert np.array_equal(a, b)
    assert 0.0 <= a.min() and a.max() <= 1.0
    reals, fakes = sc.generate_corpus(small_spec(4))
    assert len(reals) == len(fakes) == 4


def test_unknown_corpus_key():
    with pytest.raises(ValueError):
        sc.gen_real({"colour": 1}, 0)


def test_identity_degradations():
    rng = np.random.default_rng(0)
    x = rng.uniform(0.05, 0.95, size=(8, 8, 3))
    n = sc.exposure_coefficient_count(11)
    assert n == 78
    a = np.zeros(n)
    phi = np.zeros((5, 5, 2))
    assert np.allclose(sc.apply_exposure(x, a, phi), x, atol=1e-12)
    a[0] = 0.5
    assert np.allclose(sc.exposure_field(a, phi, height=8, width=8), 0.5)
    assert np.allclose(sc.apply_blur(x, np.full((8, 8), 1e-3)), x, atol=1e-9)
    assert np.array_equal(sc.apply_noise(x, np.zeros_like(x)), x)
    k = sc.gaussian_kernel(1.0, 2)
    assert k.shape == (5, 5)
    assert abs(k.sum() - 1.0) < 1e-12


def test_shape_errors_surface_as_value_errors():
    with pytest.raises(ValueError):
        sc.apply_noise(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))


def test_mmd():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(10, 4))
    y = rng.normal(size=(12, 4)) + 2.0
    bw = sc.bandwidth_ladder(sc.median_heuristic(x, y))
    assert sc.mmd2(x, x, bw) == pytest.approx(0.0, abs=1e-12)
    assert sc.mmd2(x, y, bw) > 0.0
    assert sc.mmd2(x, y, bw) == pytest.approx(sc.mmd2(y, x, bw))


def test_statistics():
    reals, fakes = sc.generate_corpus(small_spec(20))
    assert sum(sc.brightness_histogram(fakes)) == pytest.approx(1.0)
    freq, power = sc.radial_power_spectrum(fakes)
    assert len(freq) == len(power) == 16
    assert sc.high_frequency_log_power(fakes) > sc.high_frequency_log_power(reals)
    assert sc.spectral_peaks(reals) == []
    q = sc.quality_proxies(fakes[0], fakes[0])
    assert q == {"linf": 0.0, "l2": 0.0, "spectral_dist": 0.0}


@pytest.fixture(scope="module")
def trained():
    reals, fakes = sc.generate_corpus(small_spec(60, 11))
    det = sc.Detector("spatial_cnn", input_size=32, seed=5, conv_channels=[8, 16])
    report = det.train(reals, fakes, epochs=12, lr=0.05, batch=16, seed=5)
    return det, report, reals, fakes


def test_detector_and_attacks(trained, tmp_path):
    det, report, reals, fakes = trained
    assert det.trained
    assert report["train_accuracy"] > 0.9
    assert det.logits(fakes[:3]).shape == (3, 2)

    det.save(tmp_path / "det")
    back = sc.Detector.load(tmp_path / "det")
    assert np.array_equal(back.logits(fakes[:3]), det.logits(fakes[:3]))

    eps = 8 / 255
    fg = sc.fgsm_baseline(fakes[:4], det, {"epsilon": eps})
    for a, x in zip(fg, fakes[:4]):
        assert np.abs(a - x).max() <= eps + 1e-12

    advs, trace, params = sc.stat_attack(
        fakes[:6], reals[:6], det, {"iterations": 2, "batch": 6, "smoothness_sign": "penalty"})
    assert len(advs) == 6
    assert [row["iter"] for row in trace] == [0, 1, 2]
    assert len(params) == 1
    asr, successes, denominator = sc.attack_success(det, fakes[:6], advs)
    assert 0.0 <= asr <= 1.0 and successes <= denominator

    advs, trace, params = sc.mstat_attack(
        fakes[:6], reals[:6], det, {"iterations": 1, "batch": 6, "layers": 2})
    assert len(params[0]["layers"]) == 2


def test_cli_and_config(tmp_path):
    code, out, err = sc.run_cli(["synth", "--n", "2", "--size", "32", "--out", str(tmp_path / "c")])
    assert code == 0
    assert (tmp_path / "c" / "manifest.json").exists()
    assert sc.run_cli(["bogus"])[0] == 2
    cfg = sc.default_config()
    assert cfg["attack"]["layers"] == 3
    json.dumps(cfg)
