"""Pseudo-spectral calculus on the periodic unit torus.

Conventions, used by every other module:

* The torus is [0, 1)^d with d in {2, 3}; node j along an axis sits at
  x = j * h with h = 1/n, so fields are plain (n,)*d arrays.
* Fourier coefficients are c(k) = (1/n^d) sum_j f(x_j) exp(-2 pi i k.x_j)
  with integer wavevectors in the usual FFT layout; c(0) is the mean.
* Derivative multipliers are 2 pi i k with the Nyquist row |k_i| = n/2
  zeroed, so real fields stay real under differentiation.
* The inverse Laplacian divides by 4 pi^2 |k|^2 away from k = 0 and
  demands a mean-zero operand.
* Quadrature is the node average, exact for band-limited integrands.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as _fft

from .errors import ConfigError, GridMismatch, NonZeroMean, SchemaError

_FFT_WORKERS = 1


def set_fft_workers(k: int) -> None:
    """Set the worker count handed to the FFT backend.

    Results are bit-identical for any worker count; this only trades
    wall-clock time for CPU.
    """
    global _FFT_WORKERS
    _FFT_WORKERS = max(1, int(k))


def fftn_raw(values: np.ndarray, axes=None) -> np.ndarray:
    """Forward transform with the coefficient normalization (c(0) = mean)."""
    return _fft.fftn(values, axes=axes, norm="forward", workers=_FFT_WORKERS)


def ifftn_raw(coeffs: np.ndarray, axes=None) -> np.ndarray:
    """Inverse of :func:`fftn_raw`."""
    return _fft.ifftn(coeffs, axes=axes, norm="forward", workers=_FFT_WORKERS)


@lru_cache(maxsize=None)
def _axis_modes(n: int) -> np.ndarray:
    # integer wavenumbers in FFT layout: 0..n/2-1, -n/2..-1
    return np.fft.fftfreq(n, 1.0 / n)


@lru_cache(maxsize=None)
def _mode_mesh(d: int, n: int, axis: int) -> np.ndarray:
    k = _axis_modes(n)
    shape = [1] * d
    shape[axis] = n
    return k.reshape(shape)


@lru_cache(maxsize=None)
def _ksq_mesh(d: int, n: int) -> np.ndarray:
    out = np.zeros((n,) * d)
    for axis in range(d):
        out = out + _mode_mesh(d, n, axis) ** 2
    return out


@lru_cache(maxsize=None)
def _deriv_multiplier(d: int, n: int, axis: int) -> np.ndarray:
    k = _mode_mesh(d, n, axis).copy()
    k[k == -n // 2] = 0.0  # Nyquist zeroed: keeps derivatives of real fields real
    return 2j * np.pi * k


@lru_cache(maxsize=None)
def _invlap_multiplier(d: int, n: int) -> np.ndarray:
    ksq = _ksq_mesh(d, n)
    out = np.zeros_like(ksq)
    nz = ksq > 0
    out[nz] = 1.0 / (4.0 * np.pi**2 * ksq[nz])
    return out


@lru_cache(maxsize=None)
def _dealias_mask(d: int, n: int) -> np.ndarray:
    keep = np.ones((n,) * d, dtype=bool)
    cut = n / 3.0
    for axis in range(d):
        keep &= np.abs(_mode_mesh(d, n, axis)) <= cut
    return keep


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid: dimension d in {2, 3}, n nodes per axis."""

    d: int
    n: int

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ConfigError(f"dimension must be 2 or 3, got {self.d}")
        if self.n < 8 or self.n % 2 != 0:
            raise ConfigError(f"resolution must be even and >= 8, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    def nodes(self) -> np.ndarray:
        """Node coordinates along one axis."""
        return np.arange(self.n) * self.h

    def coords(self) -> list:
        """Sparse meshes of node coordinates, one per axis."""
        x = self.nodes()
        return [x.reshape([-1 if a == ax else 1 for a in range(self.d)])
                for ax in range(self.d)]

    def modes(self, axis: int) -> np.ndarray:
        """Integer wavevector mesh along `axis`, broadcastable to shape."""
        return _mode_mesh(self.d, self.n, axis)

    def mode_sq(self) -> np.ndarray:
        """|k|^2 mesh."""
        return _ksq_mesh(self.d, self.n)


def require_same_grid(*objs) -> GridSpec:
    grid = objs[0].grid
    for o in objs[1:]:
        if o.grid != grid:
            raise GridMismatch(f"grids differ: {grid} vs {o.grid}")
    return grid


def _as_field_values(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    arr = np.asarray(values)
    if arr.shape != grid.shape:
        raise ConfigError(f"field shape {arr.shape} does not match grid {grid.shape}")
    if np.iscomplexobj(arr):
        return np.ascontiguousarray(arr, dtype=np.complex128)
    return np.ascontiguousarray(arr, dtype=np.float64)


@dataclass
class ScalarField:
    """Real or complex samples on the nodes of `grid`."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = _as_field_values(self.grid, self.values)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)


@dataclass
class SpectralCoeffs:
    """One complex coefficient per wavevector, FFT layout."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.complex128)
        if arr.shape != self.grid.shape:
            raise ConfigError(f"coefficient shape {arr.shape} does not match grid")
        self.values = np.ascontiguousarray(arr)


@dataclass
class VectorField:
    """d stacked scalar components on one grid."""

    grid: GridSpec
    components: np.ndarray  # shape (d,) + grid.shape

    def __post_init__(self):
        arr = np.asarray(self.components)
        if arr.shape != (self.grid.d,) + self.grid.shape:
            raise ConfigError(
                f"vector shape {arr.shape} does not match grid {self.grid}")
        if np.iscomplexobj(arr):
            arr = np.ascontiguousarray(arr, dtype=np.complex128)
        else:
            arr = np.ascontiguousarray(arr, dtype=np.float64)
        self.components = arr

    def component(self, axis: int) -> ScalarField:
        return ScalarField(self.grid, self.components[axis])


def transform(field: ScalarField) -> SpectralCoeffs:
    return SpectralCoeffs(field.grid, fftn_raw(field.values))


def inverse_transform(coeffs: SpectralCoeffs, real: bool = False) -> ScalarField:
    values = ifftn_raw(coeffs.values)
    if real:
        values = values.real.copy()
    return ScalarField(coeffs.grid, values)


def integral(field: ScalarField) -> float:
    """Node-average quadrature of the samples (the integral over the torus)."""
    return field.values.mean()


def l2_norm(field: ScalarField) -> float:
    return float(np.sqrt(np.mean(np.abs(field.values) ** 2)))


def gradient(field: ScalarField) -> VectorField:
    """Spectral gradient; Nyquist modes do not contribute."""
    g = field.grid
    c = fftn_raw(field.values)
    out = np.empty((g.d,) + g.shape,
                   dtype=np.complex128 if field.is_complex else np.float64)
    for axis in range(g.d):
        comp = ifftn_raw(c * _deriv_multiplier(g.d, g.n, axis))
        out[axis] = comp if field.is_complex else comp.real
    return VectorField(g, out)


def divergence(vec: VectorField) -> ScalarField:
    g = vec.grid
    acc = np.zeros(g.shape, dtype=np.complex128)
    for axis in range(g.d):
        acc += fftn_raw(vec.components[axis]) * _deriv_multiplier(g.d, g.n, axis)
    values = ifftn_raw(acc)
    if not np.iscomplexobj(vec.components):
        values = values.real.copy()
    return ScalarField(g, values)


def _check_mean_zero(values: np.ndarray, what: str) -> None:
    mean = abs(values.mean())
    scale = np.max(np.abs(values)) if values.size else 0.0
    if mean > 1e-10 * max(scale, 1e-300):
        raise NonZeroMean(
            f"{what} requires a mean-zero operand: |mean| = {mean:.3e}, "
            f"sup = {scale:.3e}")


def inverse_laplacian(field: ScalarField) -> ScalarField:
    """Solve -Laplace(u) = f for the mean-zero u; f must be mean-zero."""
    _check_mean_zero(field.values, "inverse_laplacian")
    g = field.grid
    c = fftn_raw(field.values) * _invlap_multiplier(g.d, g.n)
    values = ifftn_raw(c)
    if not field.is_complex:
        values = values.real.copy()
    return ScalarField(g, values)


def invlap_drop_mean(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """(-Laplace)^{-1} acting on the mean-free part of raw samples.

    Internal helper for quantities of the form div((-Laplace)^{-1} w)
    where the mean of w is irrelevant because a derivative follows.
    """
    c = fftn_raw(values) * _invlap_multiplier(grid.d, grid.n)
    out = ifftn_raw(c)
    return out if np.iscomplexobj(values) else out.real.copy()


def dealias(field_or_coeffs):
    """Two-thirds rule: zero every coefficient with any |k_i| > n/3."""
    if isinstance(field_or_coeffs, SpectralCoeffs):
        g = field_or_coeffs.grid
        return SpectralCoeffs(g, field_or_coeffs.values * _dealias_mask(g.d, g.n))
    field = field_or_coeffs
    g = field.grid
    c = fftn_raw(field.values) * _dealias_mask(g.d, g.n)
    values = ifftn_raw(c)
    if not field.is_complex:
        values = values.real.copy()
    return ScalarField(g, values)


def dealias_raw(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """In-place-free raw-array variant of :func:`dealias` for hot loops."""
    c = fftn_raw(values) * _dealias_mask(grid.d, grid.n)
    out = ifftn_raw(c)
    return out if np.iscomplexobj(values) else out.real.copy()


def sobolev_norm(field: ScalarField, s: float) -> float:
    """Sobolev norm with weight <2 pi k>^(2s) = (1 + 4 pi^2 |k|^2)^s.

    Only the quadratic (p = 2) scale is provided.
    """
    g = field.grid
    c = fftn_raw(field.values)
    weight = (1.0 + 4.0 * np.pi**2 * _ksq_mesh(g.d, g.n)) ** s
    return float(np.sqrt(np.sum(weight * np.abs(c) ** 2)))


def hminus1_norm(field: ScalarField) -> float:
    """Homogeneous H^{-1} norm of a mean-zero field."""
    _check_mean_zero(field.values, "hminus1_norm")
    g = field.grid
    c = fftn_raw(field.values)
    return float(np.sqrt(np.sum(_invlap_multiplier(g.d, g.n) * np.abs(c) ** 2)))


# ---------------------------------------------------------------------------
# binary field container
#
# layout: magic "ELL1", then three little-endian uint32 (d, n, flag with
# 0 = real / 1 = complex), then the float64 payload with the x1 node index
# varying fastest.  Complex payloads interleave (re, im) per node.

_MAGIC = b"ELL1"
_HEADER = struct.Struct("<4sIII")


def write_field(path, field: ScalarField) -> None:
    g = field.grid
    flag = 1 if field.is_complex else 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, g.d, g.n, flag))
        fh.write(np.asfortranarray(field.values).tobytes(order="F"))


def read_field(path) -> ScalarField:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise SchemaError(f"{path}: truncated header")
        magic, d, n, flag = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise SchemaError(f"{path}: bad magic {magic!r}")
        if flag not in (0, 1):
            raise SchemaError(f"{path}: bad payload flag {flag}")
        grid = GridSpec(int(d), int(n))
        dtype = np.complex128 if flag else np.float64
        payload = fh.read()
    expected = grid.size * np.dtype(dtype).itemsize
    if len(payload) != expected:
        raise SchemaError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}")
    values = np.frombuffer(payload, dtype=dtype).reshape(grid.shape, order="F")
    return ScalarField(grid, values.copy())
