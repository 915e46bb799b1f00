"""Coherent-state factories: packets and monokinetic mixtures.

A packet is a periodized Gaussian with a plane phase riding on it,

    phi(x) ~ sum_m exp(-|x - x0 + m|^2 / (4 sigma^2))
                   exp(i v0.(x - x0 + m) / hbar),

images summed jointly so envelope and phase periodize together.  The
sum factorizes across axes, so construction is d one-dimensional image
sums and an outer product.  Width sigma^2 = hbar balances the envelope
kinetic cost hbar^2/sigma^2 against the phase-sampling error sigma^2.

A monokinetic mixture places one packet at each point of a uniform
m-per-axis lattice, weight proportional to a target density (floored),
momentum read off a carrier velocity field.  Its density approaches
the target as m grows, up to lattice ghosts of relative size
exp(-2 pi^2 sigma^2 m^2) and the fixed sigma-smoothing of the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import grid as gr
from . import hartree as hr
from .errors import ConfigError, MeanNotOne, NegativeDensity, ResolutionGuard

_MAX_WIDTH = 0.25
_TAIL = 6.0  # envelope guard: exp(-_TAIL^2) ~ 2e-16 below peak at the band edge


@dataclass(frozen=True)
class PacketSpec:
    """Center, momentum, and width of one Gaussian packet.

    width None defers to sigma = sqrt(hbar) at build time.  Widths up
    to 1/4 are representable; sigma <= 1/8 is the well-localized regime
    where periodization corrections sit far below round-off.
    """

    center: tuple
    momentum: tuple
    width: float | None = None

    def __post_init__(self):
        center = tuple(float(c) % 1.0 for c in np.atleast_1d(self.center))
        momentum = tuple(float(v) for v in np.atleast_1d(self.momentum))
        if len(center) not in (2, 3):
            raise ConfigError(f"center must have 2 or 3 components, got {len(center)}")
        if len(momentum) != len(center):
            raise ConfigError(
                f"momentum has {len(momentum)} components, center {len(center)}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "momentum", momentum)
        if self.width is not None:
            self._check_width(float(self.width))

    @staticmethod
    def _check_width(sigma: float) -> None:
        if not (0.0 < sigma <= _MAX_WIDTH):
            raise ConfigError(f"width must lie in (0, {_MAX_WIDTH}], got {sigma}")

    def resolved_width(self, params: hr.PhysicalParams) -> float:
        if self.width is not None:
            return float(self.width)
        sigma = math.sqrt(params.hbar)
        self._check_width(sigma)
        return sigma


def _require_envelope_resolution(grid: gr.GridSpec, sigma: float,
                                 center_mode: float) -> None:
    """The packet's Fourier lobe must die out inside the dealiased band."""
    slack = grid.n / 3.0 - center_mode
    if 2.0 * np.pi * sigma * slack < _TAIL:
        need = 3.0 * (center_mode + _TAIL / (2.0 * np.pi * sigma))
        raise ResolutionGuard(
            f"envelope of width {sigma:.3g} at mode offset {center_mode:.1f} "
            f"spills past n/3 = {grid.n / 3:.1f}; need n >= {need:.0f}")


def _axis_image_sum(nodes, x0, v, hbar, sigma):
    """1D joint envelope-phase image sum over the shell that matters.

    The base offset is wrapped to [-1/2, 1/2) so the summed image set -
    and hence the result - depends only on the periodic distance; grid
    translations of the center then permute node values exactly.
    """
    delta0 = nodes - x0
    delta0 -= np.round(delta0)
    reach = math.ceil(12.9 * sigma + 0.5)  # discarded images below 1e-18 of peak
    out = np.zeros(nodes.shape, dtype=np.complex128)
    for shift in range(-reach, reach + 1):
        delta = delta0 + shift
        out += np.exp(-delta**2 / (4.0 * sigma**2) + (1j * v / hbar) * delta)
    return out


def gaussian_packet(spec: PacketSpec, grid: gr.GridSpec,
                    params: hr.PhysicalParams) -> gr.ScalarField:
    """Unit-norm periodized Gaussian packet; raises if under-resolved."""
    sigma = spec.resolved_width(params)
    speed = float(np.linalg.norm(spec.momentum))
    hr.require_momentum_resolution(grid, params, speed)
    _require_envelope_resolution(grid, sigma, speed / (2.0 * np.pi * params.hbar))
    if len(spec.center) != grid.d:
        raise ConfigError(f"packet is {len(spec.center)}-dimensional, grid {grid.d}")
    nodes = grid.nodes()
    axis_sums = [_axis_image_sum(nodes, spec.center[a], spec.momentum[a],
                                 params.hbar, sigma)
                 for a in range(grid.d)]
    if grid.d == 2:
        values = np.multiply.outer(axis_sums[0], axis_sums[1])
    else:
        values = np.einsum("i,j,k->ijk", *axis_sums)
    values /= math.sqrt(np.mean(np.abs(values) ** 2))
    return gr.ScalarField(grid, values)


def expected_momentum(packet: gr.ScalarField, params: hr.PhysicalParams) -> np.ndarray:
    """Node-average of conj(phi)(-i hbar grad)phi, one entry per axis."""
    g = packet.grid
    hats = gr.fftn_raw(packet.values)
    conj = np.conj(packet.values)
    out = np.empty(g.d)
    for a in range(g.d):
        grad_a = gr.ifftn_raw(hats * gr._deriv_multiplier(g.d, g.n, a))
        out[a] = params.hbar * np.mean((conj * grad_a).imag)
    return out


def monokinetic_mixture(u0: gr.VectorField, rho0: gr.ScalarField,
                        grid: gr.GridSpec, params: hr.PhysicalParams,
                        packets_per_axis: int,
                        width: float | None = None) -> hr.MixedState:
    """Lattice of packets carrying u0, weighted by rho0 (floored at 1e-3).

    The lattice must be commensurate with the grid so that centers,
    weights, and momenta are read at exact nodes.
    """
    if gr.require_same_grid(u0, rho0) != grid:
        raise ConfigError("u0 and rho0 live on a different grid than requested")
    m = int(packets_per_axis)
    if m < 1:
        raise ConfigError(f"packets_per_axis must be >= 1, got {packets_per_axis}")
    if grid.n % m != 0:
        raise ConfigError(
            f"packets_per_axis {m} does not divide grid resolution {grid.n}")
    vals = rho0.values
    if np.iscomplexobj(vals) or float(vals.min()) <= 0.0:
        raise NegativeDensity("rho0 must be real and strictly positive")
    mean = float(vals.mean())
    if abs(mean - 1.0) > 1e-8:
        raise MeanNotOne(f"rho0 mean {mean!r} differs from 1 beyond 1e-8")

    stride = grid.n // m
    take = (slice(None, None, stride),) * grid.d
    weights = np.maximum(vals[take], 1e-3).ravel()
    weights = weights / weights.sum()
    momenta = np.stack([u0.components[a][take].ravel() for a in range(grid.d)],
                       axis=1)

    sigma = width if width is not None else math.sqrt(params.hbar)
    PacketSpec._check_width(float(sigma))
    centers = np.stack([idx.ravel() for idx in np.indices((m,) * grid.d)],
                       axis=1) * (stride * grid.h)

    orbitals = np.empty((m**grid.d,) + grid.shape, dtype=np.complex128)
    for j in range(m**grid.d):
        spec = PacketSpec(tuple(centers[j]), tuple(momenta[j]), float(sigma))
        orbitals[j] = gaussian_packet(spec, grid, params).values
    return hr.MixedState(grid, orbitals, weights)
