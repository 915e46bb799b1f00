"""Mixed-state mean-field Schroedinger dynamics on the torus.

A rank-M density matrix is represented as a weighted ensemble of unit
orbitals; the rank is preserved because every orbital evolves under the
one shared mean-field potential eps^{-2} (V * rho).  Propagation is
Strang potential-kinetic-potential splitting.  Both substeps multiply
by unimodular phases (pointwise in space, pointwise in Fourier), so
orbital norms and the mixture weights are conserved to round-off.

The stiff scale of the combined limit is the potential phase advanced
per step, sup|V * rho| dt / (hbar eps^2).  Steps that would push it
past pi are refused with PhaseResolution rather than silently aliasing
the phase; see strang_step.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import coulomb as cb
from . import grid as gr
from .errors import ConfigError, PhaseResolution, ResolutionGuard, SchemaError

_MANIFEST = "manifest.json"
_FOUR_PI_SQ = 4.0 * np.pi**2


@dataclass(frozen=True)
class PhysicalParams:
    """Semiclassical parameter hbar and quasineutral parameter eps."""

    hbar: float
    eps: float

    def __post_init__(self):
        for name in ("hbar", "eps"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be finite and positive, got {value}")


@dataclass
class MixedState:
    """Weighted orbital ensemble: rank-M mixture of unit wave functions.

    Orbitals are stacked along axis 0 of a complex array; weights are
    nonnegative and sum to one.  Validation enforces unit L2 norm per
    orbital, so density mean 1 is automatic.
    """

    grid: gr.GridSpec
    orbitals: np.ndarray  # (M,) + grid.shape, complex
    weights: np.ndarray  # (M,) nonnegative, unit sum

    def __post_init__(self):
        orbs = np.ascontiguousarray(self.orbitals, dtype=np.complex128)
        if orbs.ndim != self.grid.d + 1 or orbs.shape[1:] != self.grid.shape:
            raise ConfigError(
                f"orbitals shape {orbs.shape} does not match (M,) + {self.grid.shape}")
        if orbs.shape[0] < 1:
            raise ConfigError("need at least one orbital")
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (orbs.shape[0],):
            raise ConfigError(
                f"weights shape {w.shape} does not match {orbs.shape[0]} orbitals")
        if np.any(w < 0):
            raise ConfigError("weights must be nonnegative")
        total = float(w.sum())
        if abs(total - 1.0) > 1e-12:
            raise ConfigError(f"weights sum to {total!r}, must be 1 to 1e-12")
        axes = tuple(range(1, orbs.ndim))
        norms = np.sqrt(np.mean(np.abs(orbs) ** 2, axis=axes))
        worst = float(np.max(np.abs(norms - 1.0)))
        if worst > 1e-10:
            raise ConfigError(f"orbital L2 norm off unit by {worst:.3e}")
        self.orbitals = orbs
        self.weights = w

    @property
    def rank(self) -> int:
        return self.orbitals.shape[0]

    def orbital(self, m: int) -> gr.ScalarField:
        return gr.ScalarField(self.grid, self.orbitals[m])

    @classmethod
    def from_fields(cls, fields, weights) -> "MixedState":
        g = gr.require_same_grid(*fields)
        stack = np.stack([np.asarray(f.values, dtype=np.complex128) for f in fields])
        return cls(g, stack, weights)


def _spatial_axes(grid: gr.GridSpec) -> tuple:
    return tuple(range(1, grid.d + 1))


def _density_values(orbitals: np.ndarray, weights: np.ndarray) -> np.ndarray:
    # fixed reduction order over m keeps the result deterministic
    return np.einsum("m,m...->...", weights, np.abs(orbitals) ** 2)


def density(state: MixedState) -> gr.ScalarField:
    """rho = sum_m w_m |phi_m|^2; nonnegative with unit mean."""
    return gr.ScalarField(state.grid, _density_values(state.orbitals, state.weights))


def current(state: MixedState, params: PhysicalParams) -> gr.VectorField:
    """J = hbar sum_m w_m Im(conj(phi_m) grad(phi_m))."""
    g = state.grid
    axes = _spatial_axes(g)
    hats = gr.fftn_raw(state.orbitals, axes=axes)
    conj = np.conj(state.orbitals)
    comps = np.empty((g.d,) + g.shape)
    for a in range(g.d):
        grad_a = gr.ifftn_raw(hats * gr._deriv_multiplier(g.d, g.n, a), axes=axes)
        comps[a] = params.hbar * np.einsum(
            "m,m...->...", state.weights, (conj * grad_a).imag)
    return gr.VectorField(g, comps)


def hartree_potential(rho: gr.ScalarField, params: PhysicalParams) -> gr.ScalarField:
    """The shared mean-field potential eps^{-2} (V * rho); mean-zero."""
    smoothed = cb.convolve_kernel(rho)
    return gr.ScalarField(rho.grid, smoothed.values / params.eps**2)


@lru_cache(maxsize=8)
def _kinetic_phase(d: int, n: int, hbar: float, dt: float) -> np.ndarray:
    ksq = gr.GridSpec(d, n).mode_sq()
    return np.exp((-0.5j * hbar * _FOUR_PI_SQ * dt) * ksq)


def _potential_phase(orbitals, weights, grid, params, dt):
    """Half-step phase for the current density, guarded against aliasing."""
    rho = _density_values(orbitals, weights)
    pot = gr.invlap_drop_mean(rho, grid).real
    advance = float(np.max(np.abs(pot))) * dt / (params.hbar * params.eps**2)
    if advance > np.pi + 1e-12:
        cap = np.pi * params.hbar * params.eps**2 / max(float(np.max(np.abs(pot))), 1e-300)
        raise PhaseResolution(
            f"potential phase advances {advance:.3f} per step, cap is pi; "
            f"use dt <= {cap:.3e}")
    return np.exp(pot * (-0.5j * dt / (params.hbar * params.eps**2)))


def strang_step(state: MixedState, params: PhysicalParams, dt: float) -> MixedState:
    """One potential-kinetic-potential step of length dt.

    The potential substep multiplies by exp(-i (V*rho) dt / (2 hbar eps^2))
    with one potential shared across orbitals; the kinetic substep is the
    exact free flow exp(-i hbar 4 pi^2 |k|^2 dt / 2) in Fourier space; the
    closing potential substep re-evaluates rho.
    """
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    g = state.grid
    axes = _spatial_axes(g)
    orbs = state.orbitals * _potential_phase(
        state.orbitals, state.weights, g, params, dt)
    hats = gr.fftn_raw(orbs, axes=axes)
    hats *= _kinetic_phase(g.d, g.n, params.hbar, dt)
    orbs = gr.ifftn_raw(hats, axes=axes)
    orbs *= _potential_phase(orbs, state.weights, g, params, dt)
    return MixedState(g, orbs, state.weights)


def kinetic_energy(state: MixedState, params: PhysicalParams) -> float:
    """sum_m w_m (hbar^2/2) ||grad phi_m||^2, evaluated spectrally."""
    g = state.grid
    hats = gr.fftn_raw(state.orbitals, axes=_spatial_axes(g))
    ksq = g.mode_sq()
    per_orbital = np.sum(np.abs(hats) ** 2 * ksq, axis=_spatial_axes(g))
    return 0.5 * params.hbar**2 * _FOUR_PI_SQ * float(state.weights @ per_orbital)


def potential_energy(state: MixedState, params: PhysicalParams) -> float:
    """(1/(2 eps^2)) sum_{k != 0} |rho-hat(k)|^2 / (4 pi^2 |k|^2); nonnegative."""
    g = state.grid
    rho_hat = gr.fftn_raw(_density_values(state.orbitals, state.weights))
    ksq = g.mode_sq().astype(np.float64)
    ksq.flat[0] = 1.0  # k = 0 dropped below
    summand = np.abs(rho_hat) ** 2 / (_FOUR_PI_SQ * ksq)
    summand.flat[0] = 0.0
    return 0.5 / params.eps**2 * float(np.sum(summand))


def total_energy(state: MixedState, params: PhysicalParams) -> float:
    """Conserved energy of the flow: kinetic plus Coulomb self-energy."""
    return kinetic_energy(state, params) + potential_energy(state, params)


def require_momentum_resolution(grid: gr.GridSpec, params: PhysicalParams,
                                u_scale: float) -> None:
    """Demand the dealiased band reach momenta 4x the velocity scale.

    Orbitals adapted to a flow of size u carry phases exp(i u.x / hbar),
    wavenumber u/(2 pi hbar); under-resolving them corrupts the kinetic
    energy silently, hence a hard guard.
    """
    reach = 2.0 * np.pi * params.hbar * (grid.n / 3.0)
    if reach + 1e-12 < 4.0 * u_scale:
        raise ResolutionGuard(
            f"momentum reach 2 pi hbar n/3 = {reach:.3e} below 4 x velocity "
            f"scale {4.0 * u_scale:.3e}; need n >= {6.0 * u_scale / (np.pi * params.hbar):.0f}")


def save_state(path, state: MixedState, params: PhysicalParams) -> None:
    """Serialize as a directory: manifest.json plus one container per orbital."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    names = [f"orbital_{m:04d}.ell1" for m in range(state.rank)]
    for m, name in enumerate(names):
        gr.write_field(root / name, state.orbital(m))
    manifest = {
        "format": "mixed-state",
        "version": 1,
        "d": state.grid.d,
        "n": state.grid.n,
        "hbar": params.hbar,
        "eps": params.eps,
        "weights": [float(w) for w in state.weights],
        "orbitals": names,
    }
    (root / _MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_state(path) -> tuple[MixedState, PhysicalParams]:
    """Inverse of save_state; validates the manifest before touching orbitals."""
    root = Path(path)
    try:
        manifest = json.loads((root / _MANIFEST).read_text())
    except FileNotFoundError:
        raise SchemaError(f"{root}: no {_MANIFEST}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{root}/{_MANIFEST}: {exc}") from None
    for key in ("format", "d", "n", "hbar", "eps", "weights", "orbitals"):
        if key not in manifest:
            raise SchemaError(f"{root}/{_MANIFEST}: missing key {key!r}")
    if manifest["format"] != "mixed-state":
        raise SchemaError(f"{root}: format {manifest['format']!r} is not 'mixed-state'")
    if len(manifest["weights"]) != len(manifest["orbitals"]):
        raise SchemaError(
            f"{root}: {len(manifest['weights'])} weights vs "
            f"{len(manifest['orbitals'])} orbitals")
    g = gr.GridSpec(int(manifest["d"]), int(manifest["n"]))
    fields = []
    for name in manifest["orbitals"]:
        try:
            field = gr.read_field(root / name)
        except FileNotFoundError:
            raise SchemaError(f"{root}: manifest names missing file {name}") from None
        if field.grid != g:
            raise SchemaError(f"{root}/{name}: grid {field.grid} differs from manifest {g}")
        fields.append(field)
    stack = np.stack([np.asarray(f.values, dtype=np.complex128) for f in fields])
    state = MixedState(g, stack, np.asarray(manifest["weights"], dtype=np.float64))
    return state, PhysicalParams(float(manifest["hbar"]), float(manifest["eps"]))
