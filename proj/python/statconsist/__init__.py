"""Python bindings for the statconsist C++ library.

Images are float64 numpy arrays shaped [H, W, C] with values in [0, 1].
Configuration dictionaries use the same keys as the JSON configs of the CLI.
"""

from ._statconsist import (
    Detector,
    DomainError,
    NumericError,
    ShapeError,
    apply_blur,
    apply_exposure,
    apply_noise,
    attack_success,
    bandwidth_ladder,
    brightness_histogram,
    default_config,
    exposure_coefficient_count,
    exposure_field,
    exposure_tail_mass,
    fgsm_baseline,
    full_experiment,
    gaussian_kernel,
    gen_fake,
    gen_real,
    generate_corpus,
    high_frequency_log_power,
    median_heuristic,
    mmd2,
    mstat_attack,
    pgd_baseline,
    quality_proxies,
    radial_power_spectrum,
    run_cli,
    spectral_peaks,
    stat_attack,
    write_corpus,
)

__all__ = [name for name in dir() if not name.startswith("_")]
