"""Generating vectors and rank-1 density matrices for weighted convolution.

A density vector holds one non-negative scale factor per kernel offset,
is symmetric about its centre, and has a fixed central value.  Its outer
product with itself gives the K x K matrix applied tap-wise to every
convolution kernel.  Because of the symmetry and the pinned centre, a
length-K vector carries only (K - 1) / 2 free coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAMILIES = ("uniform", "linear", "gaussian", "cubic")


@dataclass(frozen=True, eq=False)
class DensityVector:
    """Odd-length symmetric vector of per-offset scale factors."""

    values: np.ndarray
    center_value: float = 1.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.shape[0] < 1 or vals.shape[0] % 2 == 0:
            raise ValueError(f"expected an odd-length vector, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError("density values must be finite and non-negative")
        if vals[vals.shape[0] // 2] != self.center_value:
            raise ValueError(
                f"central value {vals[vals.shape[0] // 2]} != {self.center_value}"
            )
        if not np.array_equal(vals, vals[::-1]):
            raise ValueError("density values must be symmetric about the centre")

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @property
    def free_count(self) -> int:
        return (self.k - 1) // 2


def density_from_free(theta, k: int, center_value: float = 1.0) -> DensityVector:
    """Build the symmetric vector [theta, center, reversed(theta)].

    ``theta`` lists the (k - 1) / 2 independent coefficients, outermost
    offset first.
    """
    if k < 1 or k % 2 == 0:
        raise ValueError(f"kernel extent must be odd and positive, got {k}")
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim != 1 or theta.shape[0] != (k - 1) // 2:
        raise ValueError(
            f"expected {(k - 1) // 2} free coefficients for extent {k}, "
            f"got shape {theta.shape}"
        )
    vals = np.concatenate([theta, [center_value], theta[::-1]])
    return DensityVector(vals, center_value)


def free_from_density(vec) -> np.ndarray:
    """Independent coefficients of a density vector; inverse of density_from_free."""
    if not isinstance(vec, DensityVector):
        vec = DensityVector(np.asarray(vec, dtype=np.float64))
    return vec.values[: vec.free_count].copy()


def density_matrix(vec) -> np.ndarray:
    """Rank-1 K x K matrix: outer product of the vector with itself."""
    vals = vec.values if isinstance(vec, DensityVector) else np.asarray(vec, np.float64)
    return np.outer(vals, vals)


def outer_density(row_vals, col_vals) -> np.ndarray:
    """Outer product of two per-axis scale vectors; no symmetry imposed."""
    row_vals = np.asarray(row_vals, dtype=np.float64)
    col_vals = np.asarray(col_vals, dtype=np.float64)
    if row_vals.shape != col_vals.shape or row_vals.ndim != 1:
        raise ValueError("scale vectors must be 1-D and equal length")
    return np.outer(row_vals, col_vals)


def named_density(family: str, k: int, slope: float = 0.3, sigma: float = 1.5) -> DensityVector:
    """One of the standard comparison families, centre pinned to 1.

    uniform: all ones.  linear: 1 - slope * |offset|, clamped at 0.
    gaussian: exp(-offset^2 / (2 sigma^2)).  cubic: 1 - |offset / m|^3
    with m = (k + 1) / 2, clamped at 0.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown density family {family!r}, expected one of {FAMILIES}")
    if k < 1 or k % 2 == 0:
        raise ValueError(f"kernel extent must be odd and positive, got {k}")
    offsets = np.abs(np.arange(k, dtype=np.float64) - k // 2)
    if family == "uniform":
        vals = np.ones(k)
    elif family == "linear":
        if slope < 0:
            raise ValueError("linear slope must be non-negative")
        vals = np.maximum(1.0 - slope * offsets, 0.0)
    elif family == "gaussian":
        if sigma <= 0:
            raise ValueError("gaussian sigma must be positive")
        vals = np.exp(-(offsets**2) / (2.0 * sigma**2))
    else:
        m = (k + 1) / 2.0
        vals = np.maximum(1.0 - (offsets / m) ** 3, 0.0)
    return DensityVector(vals)


def density_record(vec: DensityVector) -> dict:
    """Structured-text form {K, M, values[]} used in configs and reports."""
    return {"K": vec.k, "M": vec.center_value, "values": [float(v) for v in vec.values]}


def density_from_record(record: dict) -> DensityVector:
    vec = DensityVector(np.asarray(record["values"], dtype=np.float64),
                        float(record.get("M", 1.0)))
    if vec.k != int(record["K"]):
        raise ValueError(f"record K={record['K']} does not match {vec.k} values")
    return vec
