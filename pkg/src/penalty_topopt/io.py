"""Density images and raw design files.

Images are binary 8-bit portable graymaps (P5) with material drawn black and
void white.  The first image row is the top of the domain, so element row
``ny - 1`` becomes pixel row 0.
"""

from __future__ import annotations

import os
import re

import numpy as np

from .errors import ConfigurationError


def density_to_pixels(chi) -> np.ndarray:
    chi = np.clip(np.asarray(chi, dtype=float), 0.0, 1.0)
    return np.rint(255.0 * (1.0 - chi)).astype(np.uint8)[::-1]


def pixels_to_density(pix) -> np.ndarray:
    return 1.0 - np.asarray(pix, dtype=float)[::-1] / 255.0


def write_pgm(path, chi) -> None:
    pix = density_to_pixels(chi)
    if pix.ndim != 2:
        raise ValueError("density image must be 2D")
    ny, nx = pix.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())


_HEADER = re.compile(rb"\s*P5\s+(?:#.*\s+)*(\d+)\s+(?:#.*\s+)*(\d+)\s+(?:#.*\s+)*(\d+)\s")


def read_pgm_pixels(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    m = _HEADER.match(data)
    if m is None:
        raise ConfigurationError(f"{path}: not a binary graymap (P5)")
    nx, ny, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ConfigurationError(f"{path}: only 8-bit graymaps are supported")
    body = data[m.end():m.end() + nx * ny]
    if len(body) != nx * ny:
        raise ConfigurationError(f"{path}: truncated image data")
    return np.frombuffer(body, dtype=np.uint8).reshape(ny, nx)


def read_pgm(path) -> np.ndarray:
    """Density field stored in a graymap written by :func:`write_pgm`."""
    return pixels_to_density(read_pgm_pixels(path))


def read_design(path, shape) -> np.ndarray:
    """Load an initial design from a graymap or raw little-endian float64 file."""
    ny, nx = shape
    if str(path).lower().endswith(".pgm"):
        chi = read_pgm(path)
    else:
        raw = np.fromfile(path, dtype="<f8")
        if raw.size != nx * ny:
            raise ConfigurationError(
                f"{path}: expected {nx * ny} float64 values, found {raw.size}")
        chi = raw.reshape(ny, nx)
    if chi.shape != (ny, nx):
        raise ConfigurationError(f"{path}: design is {chi.shape[1]}x{chi.shape[0]}, grid is {nx}x{ny}")
    if np.any(chi < 0) or np.any(chi > 1) or not np.all(np.isfinite(chi)):
        raise ConfigurationError(f"{path}: design values must lie in [0, 1]")
    return chi


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise ConfigurationError(f"output directory {path} is not writable")
    return path
