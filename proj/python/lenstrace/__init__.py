"""Lens-to-sensor imaging simulation: ray-traced PSF grids, sensor/ISP simulation, metrics."""

import json as _json

from . import _lenstrace
from ._lenstrace import (
    CacheError,
    ImageError,
    OpticalSystem,
    PsfGrid,
    SchemaError,
    ca_curve,
    energy_transform,
    fov_map,
    generate_dataset,
    grid_mtf_areas,
    inverse_energy_transform,
    load_prescription,
    load_psf_grid,
    mtf_area_along,
    partitioned_convolve,
    preset_names,
    psnr,
    read_fov_png,
    read_png,
    save_psf_grid,
    serialize_psf_grid,
    ssim,
    strehl_curve,
    trace_chief_ray,
    write_png,
)

__all__ = [
    "CacheError",
    "ImageError",
    "OpticalSystem",
    "PsfGrid",
    "SchemaError",
    "ca_curve",
    "compute_psf_grid",
    "energy_transform",
    "fov_map",
    "generate_dataset",
    "grid_mtf_areas",
    "inverse_energy_transform",
    "load_prescription",
    "load_psf_grid",
    "mtf_area_along",
    "parse_prescription",
    "partitioned_convolve",
    "preset_names",
    "psnr",
    "read_fov_png",
    "read_png",
    "save_psf_grid",
    "serialize_psf_grid",
    "simulate_image",
    "ssim",
    "strehl_curve",
    "trace_chief_ray",
    "verify_psf_grid",
    "write_png",
]


def _dump(config):
    return "" if config is None else _json.dumps(config)


def parse_prescription(doc):
    """Optical system from a prescription given as a dict."""
    return _lenstrace.parse_prescription(_json.dumps(doc))


def compute_psf_grid(system, spec=None):
    """PSF grid for `system`; `spec` is a dict of grid settings (rows, cols, wavelengths_nm, ...)."""
    return _lenstrace.compute_psf_grid(system, _dump(spec))


def verify_psf_grid(grid, system, spec=None, tolerance=1e-6):
    return _lenstrace.verify_psf_grid(grid, system, _dump(spec), tolerance)


def simulate_image(srgb, grid, system, config=None, seed=0):
    """Returns (degraded sRGB array, sampled parameters). `config` is a dict of simulation settings."""
    return _lenstrace.simulate_image(srgb, grid, system, _dump(config), seed)
