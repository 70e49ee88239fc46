"""Input feature mappings applied before the first layer.

Three kinds are supported: the identity, the 1D sinusoid pair
[sin(2^i pi x), cos(2^i pi x)], and the 2D map that keeps the raw
coordinates and appends the sinusoid pair of each coordinate. The mapping
is fixed (not trained); one frequency exponent i per run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError

IDENTITY = "identity"
FOURIER_1D = "fourier1d"
FOURIER_2D_PLUS_ID = "fourier2d+id"


@dataclass(frozen=True)
class FeatureMap:
    kind: str
    freq_exponent: int = 0
    input_dim: int = 1

    def __post_init__(self):
        if self.kind not in (IDENTITY, FOURIER_1D, FOURIER_2D_PLUS_ID):
            raise ValueError(f"unknown feature map kind {self.kind!r}")
        if self.freq_exponent < 0:
            raise ValueError("frequency exponent must be >= 0")
        if self.kind == FOURIER_1D and self.input_dim != 1:
            raise ValueError("fourier1d maps scalar inputs")
        if self.kind == FOURIER_2D_PLUS_ID and self.input_dim != 2:
            raise ValueError("fourier2d+id maps planar inputs")
        if self.input_dim not in (1, 2):
            raise ValueError("input_dim must be 1 or 2")

    @property
    def output_dim(self) -> int:
        if self.kind == IDENTITY:
            return self.input_dim
        if self.kind == FOURIER_1D:
            return 2
        return 6

    @property
    def omega(self) -> float:
        """Angular frequency 2^i * pi of the sinusoid pair."""
        return (2.0 ** self.freq_exponent) * np.pi

    def to_dict(self) -> dict:
        return {"kind": self.kind, "freq_exponent": self.freq_exponent, "input_dim": self.input_dim}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureMap":
        return cls(**d)


def identity_map(dim: int) -> FeatureMap:
    return FeatureMap(IDENTITY, 0, dim)


def fourier1d(i: int) -> FeatureMap:
    return FeatureMap(FOURIER_1D, i, 1)


def fourier2d_plus_identity(i: int) -> FeatureMap:
    return FeatureMap(FOURIER_2D_PLUS_ID, i, 2)


def _check_points(fmap: FeatureMap, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != fmap.input_dim:
        raise DimensionMismatchError(
            f"points have dim {x.shape[1]}, feature map expects {fmap.input_dim}"
        )
    return x


def map_batch(fmap: FeatureMap, x: np.ndarray) -> np.ndarray:
    """delta(x) for a batch of points; returns (n, output_dim)."""
    x = _check_points(fmap, x)
    if fmap.kind == IDENTITY:
        return x.copy()
    w = fmap.omega
    if fmap.kind == FOURIER_1D:
        t = w * x[:, 0]
        return np.stack([np.sin(t), np.cos(t)], axis=1)
    tx, ty = w * x[:, 0], w * x[:, 1]
    return np.stack(
        [x[:, 0], x[:, 1], np.sin(tx), np.cos(tx), np.sin(ty), np.cos(ty)], axis=1
    )


def map_point(fmap: FeatureMap, x) -> np.ndarray:
    """delta(x) for a single point; returns (output_dim,)."""
    return map_batch(fmap, np.atleast_1d(np.asarray(x, dtype=np.float64)))[0]


def map_jacobian_batch(fmap: FeatureMap, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact first and second derivatives of the features.

    Returns (jac, d2_last) with jac of shape (n, output_dim, d) and d2_last of
    shape (n, output_dim): the second derivative of each feature in the last
    input coordinate (the only one the energy densities penalize).
    """
    x = _check_points(fmap, x)
    n, d = x.shape
    out = fmap.output_dim
    jac = np.zeros((n, out, d))
    d2 = np.zeros((n, out))
    if fmap.kind == IDENTITY:
        jac[:] = np.eye(out)[None, :, :]
        return jac, d2
    w = fmap.omega
    if fmap.kind == FOURIER_1D:
        t = w * x[:, 0]
        jac[:, 0, 0] = w * np.cos(t)
        jac[:, 1, 0] = -w * np.sin(t)
        d2[:, 0] = -w * w * np.sin(t)
        d2[:, 1] = -w * w * np.cos(t)
        return jac, d2
    tx, ty = w * x[:, 0], w * x[:, 1]
    jac[:, 0, 0] = 1.0
    jac[:, 1, 1] = 1.0
    jac[:, 2, 0] = w * np.cos(tx)
    jac[:, 3, 0] = -w * np.sin(tx)
    jac[:, 4, 1] = w * np.cos(ty)
    jac[:, 5, 1] = -w * np.sin(ty)
    d2[:, 4] = -w * w * np.sin(ty)
    d2[:, 5] = -w * w * np.cos(ty)
    return jac, d2


def map_jacobian(fmap: FeatureMap, x) -> tuple[np.ndarray, np.ndarray]:
    """Single-point variant of map_jacobian_batch: ((output_dim, d), (output_dim,))."""
    jac, d2 = map_jacobian_batch(fmap, np.atleast_1d(np.asarray(x, dtype=np.float64)))
    return jac[0], d2[0]
