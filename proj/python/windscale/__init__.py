"""Covariate-conditioned wind downscaling.

Fields are exchanged as ``Field`` objects holding a (C, H, W) float64 array and
channel names from the variable catalog (``"U_surf"``, ``"u10"``, ``"me"``, ...).
"""

import torch  # noqa: F401  (loads the libtorch shared libraries)

from ._core import (
    ConfigError,
    Downscaler,
    Error,
    Field,
    FileError,
    ShapeError,
    baseline,
    lsd,
    preset,
    preset_names,
    rapsd,
    read_field,
    read_pair,
    rmse,
    synth_data,
    train,
    write_field,
)

__all__ = [
    "ConfigError",
    "Downscaler",
    "Error",
    "Field",
    "FileError",
    "ShapeError",
    "baseline",
    "lsd",
    "preset",
    "preset_names",
    "rapsd",
    "read_field",
    "read_pair",
    "rmse",
    "synth_data",
    "train",
    "write_field",
]
