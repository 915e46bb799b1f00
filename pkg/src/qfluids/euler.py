"""Incompressible Euler flows and the fields derived from them.

d = 2 carries a pseudo-spectral vorticity solver (RK4, 2/3-dealiased,
stream-function inversion with zero mean flow); d = 3 only evaluates
prescribed analytic stationary flows.  Conventions: w = d1 u2 - d2 u1,
u = (d2 psi, -d1 psi) with -Laplace(psi) = w.

On top of the velocity sit the quadratic-form fields of the modulated
energy machinery: the corrector U = sum_{a,b} (da ub)(db ua), the
pressure -Laplace(p) = U, its time derivative assembled from
dt_u = -u.grad(u) - grad(p), and the transport potential
A = div (-Laplace)^{-1} (u U).  All products are dealiased; on a grid
whose n is not a multiple of 3 the surviving modes are alias-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grid as gr
from .errors import CflViolation, ConfigError, NotDivergenceFree

TIMESERIES_HEADER = "t,energy,enstrophy,gradu_inf,c11"


@dataclass
class FlowState:
    """Vorticity-form state of the d=2 solver."""

    vorticity: gr.ScalarField
    t: float = 0.0

    def __post_init__(self):
        if self.vorticity.grid.d != 2:
            raise ConfigError("time-dependent flow states are d=2 only")
        gr._check_mean_zero(self.vorticity.values, "vorticity")


def velocity_from_vorticity(omega: gr.ScalarField) -> gr.VectorField:
    """Stream-function inversion; the k=0 velocity (mean flow) is zero."""
    g = omega.grid
    if g.d != 2:
        raise ConfigError("vorticity inversion is d=2 only")
    gr._check_mean_zero(omega.values, "vorticity")
    psi_hat = gr.fftn_raw(omega.values) * gr._invlap_multiplier(g.d, g.n)
    u1 = gr.ifftn_raw(gr._deriv_multiplier(g.d, g.n, 1) * psi_hat).real
    u2 = gr.ifftn_raw(-gr._deriv_multiplier(g.d, g.n, 0) * psi_hat).real
    return gr.VectorField(g, np.stack([u1, u2]))


def _advection_hat(g: gr.GridSpec, w_hat: np.ndarray) -> np.ndarray:
    """Dealiased spectral tendency -(u . grad w), exactly mean-free."""
    psi_hat = w_hat * gr._invlap_multiplier(g.d, g.n)
    m0 = gr._deriv_multiplier(g.d, g.n, 0)
    m1 = gr._deriv_multiplier(g.d, g.n, 1)
    u1 = gr.ifftn_raw(m1 * psi_hat).real
    u2 = gr.ifftn_raw(-m0 * psi_hat).real
    w1 = gr.ifftn_raw(m0 * w_hat).real
    w2 = gr.ifftn_raw(m1 * w_hat).real
    out = gr.fftn_raw(u1 * w1 + u2 * w2)
    out *= gr._dealias_mask(g.d, g.n)
    out.flat[0] = 0.0
    return -out


def euler_step(state: FlowState, dt: float) -> FlowState:
    """One RK4 step of the dealiased vorticity equation."""
    if dt <= 0.0:
        raise ConfigError(f"time step must be positive, got {dt}")
    g = state.vorticity.grid
    u = velocity_from_vorticity(state.vorticity)
    sup_u = float(np.max(np.abs(u.components)))
    if dt * sup_u / g.h > 0.5 + 1e-12:
        raise CflViolation(
            f"dt*|u|/h = {dt * sup_u / g.h:.3f} exceeds 0.5; shrink dt")
    w = gr.fftn_raw(state.vorticity.values) * gr._dealias_mask(g.d, g.n)
    w.flat[0] = 0.0  # pin the invariant mean(w) = 0 against round-trip dust
    k1 = _advection_hat(g, w)
    k2 = _advection_hat(g, w + 0.5 * dt * k1)
    k3 = _advection_hat(g, w + 0.5 * dt * k2)
    k4 = _advection_hat(g, w + dt * k3)
    w_new = w + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    field = gr.ScalarField(g, gr.ifftn_raw(w_new).real)
    return FlowState(field, state.t + dt)


def advance(state: FlowState, t_end: float, dt: float) -> FlowState:
    """Step until t_end, shortening the final step to land exactly."""
    while state.t < t_end - 1e-12:
        state = euler_step(state, min(dt, t_end - state.t))
    return state


def _gradient_values(u: gr.VectorField) -> np.ndarray:
    """All first derivatives: entry [a, b] holds da u^b on the nodes."""
    g = u.grid
    hats = [gr.fftn_raw(u.components[b]) for b in range(g.d)]
    out = np.empty((g.d, g.d) + g.shape)
    for a in range(g.d):
        mult = gr._deriv_multiplier(g.d, g.n, a)
        for b in range(g.d):
            out[a, b] = gr.ifftn_raw(mult * hats[b]).real
    return out


def _require_divergence_free(u: gr.VectorField) -> None:
    g = u.grid
    div_hat = sum(gr._deriv_multiplier(g.d, g.n, a) * gr.fftn_raw(u.components[a])
                  for a in range(g.d))
    sup = float(np.max(np.abs(gr.ifftn_raw(div_hat).real)))
    if sup > 1e-8:
        raise NotDivergenceFree(f"max |div u| = {sup:.3e} exceeds 1e-8")


def corrector_field(u: gr.VectorField) -> gr.ScalarField:
    """U = sum_{a,b} (da u^b)(db u^a), dealiased; mean vanishes since
    U = div(u . grad u) for divergence-free u."""
    _require_divergence_free(u)
    g = u.grid
    grads = _gradient_values(u)
    total = np.zeros(g.shape)
    for a in range(g.d):
        for b in range(g.d):
            total += grads[a, b] * grads[b, a]
    return gr.ScalarField(g, gr.dealias_raw(total, g))


def pressure_from_corrector(corrector: gr.ScalarField) -> gr.ScalarField:
    """Solve -Laplace(p) = U for mean-zero p."""
    return gr.inverse_laplacian(corrector)


def pressure_field(u: gr.VectorField) -> gr.ScalarField:
    return pressure_from_corrector(corrector_field(u))


def _velocity_tendency(u: gr.VectorField) -> gr.VectorField:
    """dt_u = -u.grad(u) - grad(p) with dealiased advection."""
    g = u.grid
    grads = _gradient_values(u)
    p_hat = gr.fftn_raw(pressure_field(u).values)
    comps = np.empty_like(u.components)
    for b in range(g.d):
        adv = sum(u.components[a] * grads[a, b] for a in range(g.d))
        grad_p = gr.ifftn_raw(gr._deriv_multiplier(g.d, g.n, b) * p_hat).real
        comps[b] = -gr.dealias_raw(adv, g) - grad_p
    return gr.VectorField(g, comps)


def pressure_time_derivative(u: gr.VectorField) -> gr.ScalarField:
    """Solve -Laplace(dt_p) = 2 sum_{a,b} (da dt_u^b)(db u^a)."""
    g = u.grid
    grads = _gradient_values(u)
    tend_grads = _gradient_values(_velocity_tendency(u))
    rhs = np.zeros(g.shape)
    for a in range(g.d):
        for b in range(g.d):
            rhs += tend_grads[a, b] * grads[b, a]
    rhs_field = gr.ScalarField(g, gr.dealias_raw(2.0 * rhs, g))
    return gr.inverse_laplacian(rhs_field)


def div_inverse_laplacian(w: gr.VectorField) -> gr.ScalarField:
    """div (-Laplace)^{-1} w, componentwise inversion then divergence."""
    g = w.grid
    invlap = gr._invlap_multiplier(g.d, g.n)
    out_hat = sum(gr._deriv_multiplier(g.d, g.n, a) * invlap
                  * gr.fftn_raw(w.components[a]) for a in range(g.d))
    return gr.ScalarField(g, gr.ifftn_raw(out_hat).real)


def aux_transport_field(u: gr.VectorField) -> gr.ScalarField:
    """A = div (-Laplace)^{-1} (u U) with a dealiased product."""
    corrector = corrector_field(u)
    g = u.grid
    prods = np.stack([gr.dealias_raw(u.components[a] * corrector.values, g)
                      for a in range(g.d)])
    return div_inverse_laplacian(gr.VectorField(g, prods))


def kinetic_energy(u: gr.VectorField) -> float:
    return 0.5 * float(np.mean(np.sum(u.components**2, axis=0)))


def _vorticity_values(u: gr.VectorField, grads: np.ndarray) -> np.ndarray:
    if u.grid.d == 2:
        return grads[0, 1] - grads[1, 0]
    return np.stack([grads[1, 2] - grads[2, 1],
                     grads[2, 0] - grads[0, 2],
                     grads[0, 1] - grads[1, 0]])


@dataclass
class FlowSnapshot:
    """All derived fields and norms of a velocity field at one time."""

    t: float
    u: gr.VectorField
    gradu: np.ndarray
    corrector: gr.ScalarField
    pressure: gr.ScalarField
    dt_pressure: gr.ScalarField
    aux: gr.ScalarField
    gradu_inf: float
    c11: float
    energy: float
    enstrophy: float


def flow_snapshot(source, t: float | None = None) -> FlowSnapshot:
    """Assemble the snapshot from a FlowState or a prescribed velocity."""
    if isinstance(source, FlowState):
        u = velocity_from_vorticity(source.vorticity)
        t = source.t if t is None else t
    elif isinstance(source, gr.VectorField):
        u = source
        t = 0.0 if t is None else t
    else:
        raise ConfigError(f"cannot snapshot a {type(source).__name__}")
    g = u.grid
    grads = _gradient_values(u)
    corrector = corrector_field(u)
    pressure = pressure_from_corrector(corrector)
    second = max(float(np.max(np.abs(
        gr.gradient(gr.ScalarField(g, grads[a, b])).components)))
        for a in range(g.d) for b in range(g.d))
    gradu_inf = float(np.max(np.abs(grads)))
    sup_u = float(np.max(np.abs(u.components)))
    omega = _vorticity_values(u, grads)
    omega_sq = omega**2 if g.d == 2 else np.sum(omega**2, axis=0)
    return FlowSnapshot(
        t=t,
        u=u,
        gradu=grads,
        corrector=corrector,
        pressure=pressure,
        dt_pressure=pressure_time_derivative(u),
        aux=aux_transport_field(u),
        gradu_inf=gradu_inf,
        c11=sup_u + gradu_inf + second,
        energy=kinetic_energy(u),
        enstrophy=0.5 * float(np.mean(omega_sq)),
    )


def snapshot_csv_row(snap: FlowSnapshot) -> str:
    cells = (snap.t, snap.energy, snap.enstrophy, snap.gradu_inf, snap.c11)
    return ",".join("%.17g" % c for c in cells)


FLOW_NAMES = ("shear-2d", "taylor-green-2d", "shear-3d")


def named_flow(name: str, g: gr.GridSpec) -> gr.VectorField:
    """The shipped stationary analytic solutions."""
    c = g.coords()
    zero = np.zeros(g.shape)
    if name == "shear-2d":
        if g.d != 2:
            raise ConfigError("shear-2d needs a d=2 grid")
        return gr.VectorField(g, np.stack([np.sin(2 * np.pi * c[1]) + zero, zero]))
    if name == "taylor-green-2d":
        if g.d != 2:
            raise ConfigError("taylor-green-2d needs a d=2 grid")
        u1 = np.sin(2 * np.pi * c[0]) * np.cos(2 * np.pi * c[1])
        u2 = -np.cos(2 * np.pi * c[0]) * np.sin(2 * np.pi * c[1])
        return gr.VectorField(g, np.stack([u1, u2]))
    if name == "shear-3d":
        if g.d != 3:
            raise ConfigError("shear-3d needs a d=3 grid")
        return gr.VectorField(g, np.stack([np.sin(2 * np.pi * c[2]) + zero,
                                           zero, zero]))
    raise ConfigError(f"unknown flow {name!r}; have {', '.join(FLOW_NAMES)}")


def initial_state(name: str, g: gr.GridSpec) -> FlowState:
    """Vorticity initial data for the d=2 named flows."""
    c = g.coords()
    if name == "shear-2d":
        omega = -2 * np.pi * np.cos(2 * np.pi * c[1]) + np.zeros(g.shape)
    elif name == "taylor-green-2d":
        omega = 4 * np.pi * np.sin(2 * np.pi * c[0]) * np.sin(2 * np.pi * c[1])
    elif name == "shear-3d":
        raise ConfigError("d=3 has no time stepping; use named_flow")
    else:
        raise ConfigError(f"unknown flow {name!r}; have {', '.join(FLOW_NAMES)}")
    return FlowState(gr.ScalarField(g, omega), 0.0)
