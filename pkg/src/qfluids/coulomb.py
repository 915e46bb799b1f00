"""Periodic Coulomb kernel on the unit torus and renormalized energies.

The kernel V is the zero-mean lattice Green's function: V-hat(k) equals
1/(4 pi^2 |k|^2) for k != 0 and 0 at k = 0, so -Laplace(V) = delta - 1.
Point evaluations use Ewald summation: a short-range image sum (erfc in
d = 3, the exponential-integral analogue in d = 2) plus a Gaussian-damped
Fourier sum, with the constant -eta^2 carrying the background term.  The
splitting parameter drops out of the total, which the tests exploit.

The renormalized two-body energy of a point configuration against a
background density removes the self-interaction diagonal:

    F_N = (1/N^2) sum_{i != j} V(x_i - x_j)
        - (2/N) sum_i (V * mu)(x_i) + integral((V * mu) mu)

Sums over points run in a canonical lexicographic order, which makes the
value exactly invariant under permutations of the input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import erfc, exp1

from . import grid as gr
from .errors import ConfigError, MeanNotOne, OriginEvaluation

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class EwaldParams:
    """Splitting width and cutoffs for kernel evaluation.

    Construction validates that both truncation tails are below the
    accuracy target; undersized cutoffs are rejected outright.
    """

    d: int
    eta: float
    real_cutoff: float
    fourier_cutoff: int
    target: float = 1e-12

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ConfigError(f"dimension must be 2 or 3, got {self.d}")
        if not (0.0 < self.eta <= 0.5):
            raise ConfigError(f"splitting width must lie in (0, 1/2], got {self.eta}")
        real_tail = _real_tail_bound(self.d, self.eta, self.real_cutoff)
        fourier_tail = _fourier_tail_bound(self.d, self.eta, self.fourier_cutoff)
        if real_tail > 0.25 * self.target or fourier_tail > 0.25 * self.target:
            raise ConfigError(
                f"Ewald cutoffs too small for target {self.target:.1e}: "
                f"real tail {real_tail:.2e}, fourier tail {fourier_tail:.2e}")

    @classmethod
    def auto(cls, d: int, eta: float = 0.046, target: float = 1e-12) -> "EwaldParams":
        """Pick the smallest cutoffs meeting `target` for the given width."""
        r_c = 0.1
        while _real_tail_bound(d, eta, r_c) > 0.25 * target:
            r_c += 0.05
            if r_c > 4.0:
                raise ConfigError("no workable real-space cutoff; eta too large")
        k_c = 2
        while _fourier_tail_bound(d, eta, k_c) > 0.25 * target:
            k_c += 1
            if k_c > 256:
                raise ConfigError("no workable Fourier cutoff; eta too small")
        return cls(d, eta, r_c, k_c, target)


def _short_range(d: int, r: np.ndarray, eta: float) -> np.ndarray:
    if d == 3:
        return erfc(r / (2.0 * eta)) / (4.0 * np.pi * r)
    return exp1(r * r / (4.0 * eta * eta)) / (4.0 * np.pi)


def _short_range_deriv(d: int, r: np.ndarray, eta: float) -> np.ndarray:
    gauss = np.exp(-r * r / (4.0 * eta * eta))
    if d == 3:
        return (-erfc(r / (2.0 * eta)) / (4.0 * np.pi * r * r)
                - gauss / (4.0 * np.pi**1.5 * eta * r))
    return -gauss / (_TWO_PI * r)


def _real_tail_bound(d: int, eta: float, r_c: float) -> float:
    # overcounting shell estimate: at distance rho there are at most
    # 8 d (rho + 1)^(d-1) lattice images per unit shell
    total = 0.0
    rho = r_c
    for _ in range(64):
        term = 8.0 * d * (rho + 1.0) ** (d - 1) * float(_short_range(d, np.array([rho]), eta)[0])
        total += term
        if term < 1e-18 * max(total, 1.0):
            break
        rho += 1.0
    return total


def _fourier_tail_bound(d: int, eta: float, k_c: int) -> float:
    total = 0.0
    for j in range(k_c + 1, k_c + 200):
        weight = math.exp(-4.0 * np.pi**2 * j * j * eta * eta) / (4.0 * np.pi**2 * j * j)
        term = 2.0 * d * (2 * j + 1) ** (d - 1) * weight
        total += term
        if term < 1e-18 * max(total, 1.0):
            break
    return total


@lru_cache(maxsize=None)
def _mode_table(params: EwaldParams):
    """Integer modes 0 < |k|_inf <= k_c and their damped weights."""
    k_c = params.fourier_cutoff
    axes = [np.arange(-k_c, k_c + 1)] * params.d
    mesh = np.meshgrid(*axes, indexing="ij")
    modes = np.stack([m.ravel() for m in mesh], axis=1)
    keep = np.any(modes != 0, axis=1)
    modes = modes[keep].astype(np.float64)
    ksq = np.sum(modes**2, axis=1)
    weights = np.exp(-4.0 * np.pi**2 * ksq * params.eta**2) / (4.0 * np.pi**2 * ksq)
    return modes, weights


@lru_cache(maxsize=None)
def _shift_table(params: EwaldParams) -> np.ndarray:
    """Lattice image shifts that can reach within the real-space cutoff."""
    if params.real_cutoff <= 0.5 + 1e-12:
        return np.zeros((1, params.d))
    reach = int(math.floor(params.real_cutoff + 0.5))
    axes = [np.arange(-reach, reach + 1)] * params.d
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1).astype(np.float64)


def _reduce(delta: np.ndarray) -> np.ndarray:
    """Map displacements to the nearest periodic image, entries in [-1/2, 1/2]."""
    return delta - np.round(delta)


def _real_space_sum(delta: np.ndarray, params: EwaldParams) -> np.ndarray:
    """Short-range image sum for reduced displacements of shape (..., d)."""
    out = np.zeros(delta.shape[:-1])
    for shift in _shift_table(params):
        r = np.sqrt(np.sum((delta + shift) ** 2, axis=-1))
        inside = r <= params.real_cutoff
        if np.any(inside):
            out[inside] += _short_range(params.d, r[inside], params.eta)
    return out


def kernel_value(x, params: EwaldParams) -> float:
    """V at a single displacement x (any representative of the class)."""
    delta = _reduce(np.asarray(x, dtype=np.float64).reshape(params.d))
    dist = float(np.sqrt(np.sum(delta**2)))
    if dist < 1e-12:
        raise OriginEvaluation(f"kernel evaluated at periodic distance {dist:.2e}")
    real = float(_real_space_sum(delta[None, :], params)[0])
    modes, weights = _mode_table(params)
    fourier = float(np.sum(weights * np.cos(_TWO_PI * (modes @ delta))))
    return real + fourier - params.eta**2


def kernel_gradient(x, params: EwaldParams) -> np.ndarray:
    """Gradient of V at a single displacement."""
    delta = _reduce(np.asarray(x, dtype=np.float64).reshape(params.d))
    dist = float(np.sqrt(np.sum(delta**2)))
    if dist < 1e-12:
        raise OriginEvaluation(f"kernel gradient at periodic distance {dist:.2e}")
    grad = np.zeros(params.d)
    for shift in _shift_table(params):
        image = delta + shift
        r = float(np.sqrt(np.sum(image**2)))
        if r <= params.real_cutoff:
            grad += float(_short_range_deriv(params.d, np.array([r]), params.eta)[0]) * image / r
    modes, weights = _mode_table(params)
    sines = np.sin(_TWO_PI * (modes @ delta)) * weights
    grad += -_TWO_PI * (sines @ modes)
    return grad


def convolve_kernel(field: gr.ScalarField) -> gr.ScalarField:
    """V * f on the grid: spectral division by 4 pi^2 |k|^2, mean annihilated."""
    return gr.ScalarField(field.grid, gr.invlap_drop_mean(field.values, field.grid))


@dataclass
class PointConfiguration:
    """N >= 2 labelled points on the torus, coordinates stored in [0, 1)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise ConfigError(f"points must be (N, d) with d in {{2, 3}}, got {pts.shape}")
        if pts.shape[0] < 2:
            raise ConfigError(f"need at least two points, got {pts.shape[0]}")
        pts = np.mod(pts, 1.0)
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise ConfigError("points must be pairwise distinct")
        self.points = pts

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def to_csv(self, path) -> None:
        np.savetxt(path, self.points, fmt="%.17g", delimiter=",")

    @classmethod
    def from_csv(cls, path) -> "PointConfiguration":
        return cls(np.loadtxt(path, delimiter=",", ndmin=2))


def _canonical_order(points: np.ndarray) -> np.ndarray:
    # lexicographic sort gives a summation order independent of input labels
    order = np.lexsort(tuple(points[:, ax] for ax in reversed(range(points.shape[1]))))
    return points[order]


def _pair_energy_batch(batch: np.ndarray, params: EwaldParams) -> np.ndarray:
    """sum_{i != j} V(x_i - x_j) for a stack of configurations (S, N, d)."""
    s_count, n_pts, _ = batch.shape
    modes, weights = _mode_table(params)
    # keep phase workspaces around 32M complex entries
    budget = int(4e6)
    m_chunk = min(modes.shape[0], max(1, budget // n_pts))
    s_block = max(1, budget // (n_pts * m_chunk))
    iu, ju = np.triu_indices(n_pts, k=1)
    out = np.empty(s_count)
    for s_lo in range(0, s_count, s_block):
        blk = batch[s_lo:s_lo + s_block]
        fourier = np.zeros(blk.shape[0])
        for m_lo in range(0, modes.shape[0], m_chunk):
            m = modes[m_lo:m_lo + m_chunk]
            w = weights[m_lo:m_lo + m_chunk]
            phases = np.exp(2j * np.pi * np.einsum("snd,md->snm", blk, m))
            s_k = phases.sum(axis=1)
            fourier += ((s_k.real**2 + s_k.imag**2) - n_pts) @ w
        disp = _reduce(blk[:, iu, :] - blk[:, ju, :])
        dist_sq = np.sum(disp**2, axis=-1)
        if dist_sq.size and dist_sq.min() < 1e-24:
            raise OriginEvaluation(
                f"coincident points: min pair distance {np.sqrt(dist_sq.min()):.2e}")
        real = _real_space_sum(disp, params).sum(axis=1)
        out[s_lo:s_lo + s_block] = fourier + 2.0 * real
    return out + n_pts * (n_pts - 1) * (-params.eta**2)


def _mu_mode_data(mu: gr.ScalarField):
    """Nonzero spectral data of mu: integer modes, coefficients, V-hat weights."""
    g = mu.grid
    c = gr.fftn_raw(mu.values)
    if abs(c.flat[0] - 1.0) > 1e-8:
        raise MeanNotOne(f"mu mean {c.flat[0]:.12g} differs from 1 beyond 1e-8")
    meshes = [np.broadcast_to(g.modes(ax), g.shape).ravel() for ax in range(g.d)]
    flat = c.ravel()
    ksq = g.mode_sq().ravel()
    keep = (np.abs(flat) > 1e-15 * max(1.0, np.abs(flat).max())) & (ksq > 0)
    modes = np.stack([m[keep] for m in meshes], axis=1)
    coeffs = flat[keep]
    weights = 1.0 / (4.0 * np.pi**2 * ksq[keep])
    return modes, coeffs, weights


def smooth_interaction(mu: gr.ScalarField) -> float:
    """integral (V * mu) mu, evaluated in coefficient space."""
    _, coeffs, weights = _mu_mode_data(mu)
    return float(np.sum(weights * np.abs(coeffs) ** 2))


def potential_at_points(mu: gr.ScalarField, points: np.ndarray) -> np.ndarray:
    """(V * mu) at arbitrary points via the nonuniform Fourier sum."""
    modes, coeffs, weights = _mu_mode_data(mu)
    if modes.shape[0] == 0:
        return np.zeros(points.shape[0])
    phases = np.exp(2j * np.pi * (points @ modes.T))
    return (phases @ (coeffs * weights)).real


def f_n(config: PointConfiguration, mu: gr.ScalarField | None,
        params: EwaldParams | None = None) -> float:
    """Renormalized interaction energy of `config` against background `mu`.

    `mu` must have unit mean; None means the uniform background, for which
    the smooth and cross terms vanish identically.
    """
    if params is None:
        params = EwaldParams.auto(config.d)
    if params.d != config.d:
        raise ConfigError(f"params dimension {params.d} != points dimension {config.d}")
    pts = _canonical_order(config.points)
    n_pts = config.n_points
    total = float(_pair_energy_batch(pts[None, :, :], params)[0]) / n_pts**2
    if mu is not None:
        if mu.grid.d != config.d:
            raise ConfigError("background grid dimension does not match points")
        total -= 2.0 / n_pts * float(np.sum(potential_at_points(mu, pts)))
        total += smooth_interaction(mu)
    return total


def energy_error_scale(n_pts: int, d: int) -> float:
    """Small-parameter scale (1 + log N in d=2) / N^(2/d) of the energy bounds."""
    log_term = 1.0 + (math.log(n_pts) if d == 2 else 0.0)
    return log_term / n_pts ** (2.0 / d)
