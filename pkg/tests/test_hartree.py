"""Mean-field dynamics tests.

Hand-checked oracles used below:

* Plane wave e^{2 pi i k.x}: density 1, current 2 pi hbar k, kinetic
  energy (hbar^2/2)(2 pi |k|)^2.  Its density makes the potential vanish
  identically, so the split-step flow reduces to the exact kinetic phase
  e^{-i hbar 4 pi^2 |k|^2 t / 2}.
* Unit-normalized Gaussian orbital ~ exp(-|x-x0|^2/(4 sigma^2)) (images
  summed): density is the periodized heat kernel
  (2 pi sigma^2)^{-d/2} exp(-|x-x0|^2/(2 sigma^2)), normalization
  constant (2 pi sigma^2)^{d/4}; image cross terms are below e^{-1/(8
  sigma^2)} ~ 1e-22 at sigma = 0.05.
* rho = 1 + cos(2 pi x1) has |rho-hat(+-1)| = 1/2, so the Coulomb part
  is (1/(2 eps^2)) * 2 * (1/4)/(4 pi^2) = 1/(16 pi^2) at eps = 1.  The
  orbital sqrt(rho) reproduces rho exactly at the nodes.

Measured calibrations (frozen): continuity residual ratios 4.0014 /
4.0004 under dt halving; relative energy drift 6.66e-7 over T = 0.25 at
dt = 1e-3 (n = 64, hbar = 0.05, eps = 0.3), halving ratio 4.000003.
"""

import json

import numpy as np
import pytest

from qfluids import grid as gr
from qfluids import hartree as hr
from qfluids.errors import (
    ConfigError,
    GridMismatch,
    PhaseResolution,
    ResolutionGuard,
    SchemaError,
)


def mesh(g):
    return np.meshgrid(*([g.nodes()] * g.d), indexing="ij")


def plane_wave(g, k):
    xs = mesh(g)
    return np.exp(sum(2j * np.pi * ki * xi for ki, xi in zip(k, xs)))


def plane_wave_state(g, k):
    return hr.MixedState(g, plane_wave(g, k)[None], np.array([1.0]))


def gaussian_images(g, x0, sigma, width):
    """Sum of exp(-|x - x0 + s|^2 / (width sigma^2)) over one image shell."""
    xs = mesh(g)
    out = np.zeros(g.shape)
    for shift in np.ndindex(*([3] * g.d)):
        rsq = sum((xi - xi0 + si - 1) ** 2 for xi, xi0, si in zip(xs, x0, shift))
        out += np.exp(-rsq / (width * sigma**2))
    return out


def smooth_mixture(g):
    """Two smooth orbitals, nonuniform density, moderate currents."""
    xs = mesh(g)
    a = 1.0 + 0.3 * np.cos(2 * np.pi * xs[0])
    b = plane_wave(g, (1,) + (0,) * (g.d - 1)) * (1.0 + 0.3 * np.sin(2 * np.pi * xs[1]))
    a = a / np.sqrt(np.mean(np.abs(a) ** 2))
    b = b / np.sqrt(np.mean(np.abs(b) ** 2))
    return hr.MixedState(g, np.stack([a, b]), np.array([0.6, 0.4]))


def orbital_norms(state):
    axes = tuple(range(1, state.orbitals.ndim))
    return np.sqrt(np.mean(np.abs(state.orbitals) ** 2, axis=axes))


G64 = gr.GridSpec(2, 64)
PARAMS = hr.PhysicalParams(hbar=0.05, eps=0.3)


class TestPhysicalParams:
    def test_holds_values(self):
        p = hr.PhysicalParams(0.01, 0.2)
        assert p.hbar == 0.01 and p.eps == 0.2

    @pytest.mark.parametrize("hbar,eps", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0),
                                          (np.inf, 1.0), (1.0, np.nan)])
    def test_rejects_nonpositive_or_nonfinite(self, hbar, eps):
        with pytest.raises(ConfigError):
            hr.PhysicalParams(hbar, eps)


class TestMixedState:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ConfigError, match="sum"):
            hr.MixedState(G64, np.ones((2,) + G64.shape, complex),
                          np.array([0.6, 0.6]))

    def test_negative_weight_rejected(self):
        with pytest.raises(ConfigError, match="nonnegative"):
            hr.MixedState(G64, np.ones((2,) + G64.shape, complex),
                          np.array([1.5, -0.5]))

    def test_norm_must_be_unit(self):
        with pytest.raises(ConfigError, match="norm"):
            hr.MixedState(G64, 1.001 * np.ones((1,) + G64.shape, complex),
                          np.array([1.0]))

    def test_orbital_shape_checked(self):
        with pytest.raises(ConfigError, match="shape"):
            hr.MixedState(G64, np.ones((2, 64), complex), np.array([1.0]))

    def test_needs_one_orbital(self):
        with pytest.raises(ConfigError, match="at least one"):
            hr.MixedState(G64, np.empty((0,) + G64.shape, complex), np.zeros(0))

    def test_weight_count_must_match(self):
        with pytest.raises(ConfigError, match="weights shape"):
            hr.MixedState(G64, np.ones((2,) + G64.shape, complex), np.array([1.0]))

    def test_from_fields_matches_direct(self):
        st = smooth_mixture(G64)
        fields = [st.orbital(m) for m in range(st.rank)]
        rebuilt = hr.MixedState.from_fields(fields, st.weights)
        assert np.array_equal(rebuilt.orbitals, st.orbitals)
        assert rebuilt.rank == 2

    def test_from_fields_rejects_mixed_grids(self):
        f1 = gr.ScalarField(G64, np.ones(G64.shape))
        g32 = gr.GridSpec(2, 32)
        f2 = gr.ScalarField(g32, np.ones(g32.shape))
        with pytest.raises(GridMismatch):
            hr.MixedState.from_fields([f1, f2], np.array([0.5, 0.5]))


class TestDensity:
    def test_plane_wave_uniform(self):
        rho = hr.density(plane_wave_state(G64, (3, -2))).values
        assert np.max(np.abs(rho - 1.0)) <= 1e-15

    def test_opposite_waves_mix_to_uniform(self):
        orbs = np.stack([plane_wave(G64, (1, 0)), plane_wave(G64, (-1, 0))])
        st = hr.MixedState(G64, orbs, np.array([0.5, 0.5]))
        assert np.max(np.abs(hr.density(st).values - 1.0)) <= 1e-15

    def test_gaussian_packet_matches_heat_kernel(self):
        g = gr.GridSpec(2, 128)
        sigma, x0 = 0.05, (0.31, 0.57)
        phi = gaussian_images(g, x0, sigma, 4.0)
        norm = np.sqrt(np.mean(phi**2))
        # normalization constant itself is the Gaussian integral
        assert abs(norm - (2 * np.pi * sigma**2) ** 0.5) <= 1e-14
        st = hr.MixedState(g, (phi / norm)[None], np.array([1.0]))
        closed = gaussian_images(g, x0, sigma, 2.0) / (2 * np.pi * sigma**2)
        assert np.max(np.abs(hr.density(st).values - closed)) <= 1e-10

    def test_mean_one_and_nonnegative(self):
        rho = hr.density(smooth_mixture(G64)).values
        assert abs(rho.mean() - 1.0) <= 1e-10
        assert rho.min() >= 0.0


class TestCurrent:
    def test_plane_wave_momentum(self):
        k = (2, -1)
        j = hr.current(plane_wave_state(G64, k), PARAMS).components
        for a in range(2):
            expected = 2 * np.pi * PARAMS.hbar * k[a]
            assert np.max(np.abs(j[a] - expected)) <= 1e-12

    def test_real_orbital_silent(self):
        xs = mesh(G64)
        phi = 1.0 + 0.4 * np.cos(2 * np.pi * xs[0]) * np.sin(2 * np.pi * xs[1])
        phi = phi / np.sqrt(np.mean(phi**2))
        st = hr.MixedState(G64, phi[None].astype(complex), np.array([1.0]))
        assert np.max(np.abs(hr.current(st, PARAMS).components)) <= 1e-14

    def test_mixture_is_weighted_sum(self):
        st = smooth_mixture(G64)
        j = hr.current(st, PARAMS).components
        parts = [hr.current(hr.MixedState(G64, st.orbitals[m][None],
                                          np.array([1.0])), PARAMS).components
                 for m in range(st.rank)]
        combined = st.weights[0] * parts[0] + st.weights[1] * parts[1]
        assert np.max(np.abs(j - combined)) <= 1e-15


class TestHartreePotential:
    def test_uniform_density_vanishes(self):
        rho = gr.ScalarField(G64, np.ones(G64.shape))
        out = hr.hartree_potential(rho, PARAMS).values
        assert np.all(out == 0.0)

    def test_two_mode_density(self):
        xs = mesh(G64)
        rho = gr.ScalarField(G64, 1.0 + np.cos(2 * np.pi * xs[0]))
        out = hr.hartree_potential(rho, hr.PhysicalParams(1.0, 0.5)).values
        expected = np.cos(2 * np.pi * xs[0]) / np.pi**2
        assert np.max(np.abs(out - expected)) <= 1e-14

    def test_halving_eps_quadruples(self):
        xs = mesh(G64)
        rho = gr.ScalarField(G64, 1.0 + 0.2 * np.sin(4 * np.pi * xs[1]))
        v1 = hr.hartree_potential(rho, hr.PhysicalParams(1.0, 1.0)).values
        v2 = hr.hartree_potential(rho, hr.PhysicalParams(1.0, 0.5)).values
        # eps = 1/2 divides by exactly 0.25, so the quadrupling is bit-exact
        assert np.array_equal(v2, 4.0 * v1)

    def test_mean_zero(self):
        rho = hr.density(smooth_mixture(G64))
        out = hr.hartree_potential(rho, PARAMS).values
        assert abs(out.mean()) <= 1e-15 * max(np.max(np.abs(out)), 1.0)


class TestStrangStep:
    def test_plane_wave_kinetic_phase_exact(self):
        g, k, dt = G64, (2, -1), 1e-2
        p = hr.PhysicalParams(hbar=0.5, eps=1.0)
        cur = plane_wave_state(g, k)
        for _ in range(100):
            cur = hr.strang_step(cur, p, dt)
        ksq = sum(ki**2 for ki in k)
        exact = plane_wave(g, k) * np.exp(-0.5j * p.hbar * 4 * np.pi**2 * ksq)
        assert np.max(np.abs(cur.orbitals[0] - exact)) <= 1e-12

    def test_mass_conserved_every_step(self):
        cur = smooth_mixture(G64)
        for _ in range(50):
            nxt = hr.strang_step(cur, PARAMS, 1e-3)
            assert np.max(np.abs(orbital_norms(nxt) - orbital_norms(cur))) <= 1e-12
            cur = nxt

    def test_weights_preserved_exactly(self):
        st = smooth_mixture(G64)
        before = st.weights.copy()
        out = hr.strang_step(st, PARAMS, 1e-3)
        assert np.array_equal(out.weights, before)
        assert np.array_equal(st.weights, before)

    def test_energy_conserved_to_second_order(self):
        st = smooth_mixture(G64)
        e0 = hr.total_energy(st, PARAMS)

        def drift(dt, t_end):
            cur, worst = st, 0.0
            for _ in range(int(round(t_end / dt))):
                cur = hr.strang_step(cur, PARAMS, dt)
                worst = max(worst, abs(hr.total_energy(cur, PARAMS) - e0))
            return worst / abs(e0)

        d1 = drift(1e-3, 0.25)
        d2 = drift(5e-4, 0.25)
        assert d1 <= 1e-6  # measured 6.66e-7
        assert 3.5 <= d1 / d2 <= 4.5  # measured 4.000003

    def test_continuity_second_order(self):
        st = smooth_mixture(G64)

        def residual(dt):
            s1 = hr.strang_step(st, PARAMS, dt)
            s2 = hr.strang_step(s1, PARAMS, dt)
            drho = (hr.density(s2).values - hr.density(st).values) / (2 * dt)
            return np.sqrt(np.mean((drho + gr.divergence(
                hr.current(s1, PARAMS)).values) ** 2))

        r1, r2, r3 = residual(2e-3), residual(1e-3), residual(5e-4)
        assert r3 <= 1e-6  # measured 2.9e-7
        assert 3.4 <= r1 / r2 <= 4.6  # measured 4.0014
        assert 3.4 <= r2 / r3 <= 4.6  # measured 4.0004

    def test_phase_guard_trips(self):
        st = smooth_mixture(G64)
        with pytest.raises(PhaseResolution, match="dt"):
            hr.strang_step(st, hr.PhysicalParams(1e-3, 0.1), 1.0)

    def test_phase_guard_admits_step_below_cap(self):
        # sup|V*rho| = 0.0148 here, so the cap at (1e-3, 0.1) is 2.12e-3
        st = smooth_mixture(G64)
        hr.strang_step(st, hr.PhysicalParams(1e-3, 0.1), 2.0e-3)

    @pytest.mark.parametrize("dt", [0.0, -1e-3])
    def test_nonpositive_dt_rejected(self, dt):
        with pytest.raises(ConfigError, match="dt"):
            hr.strang_step(smooth_mixture(G64), PARAMS, dt)

    def test_gauge_phase_commutes_with_flow(self):
        st = smooth_mixture(G64)
        shift = np.exp(0.7319j)
        gauged = hr.MixedState(G64, st.orbitals * shift, st.weights)
        a = hr.strang_step(gauged, PARAMS, 1e-3).orbitals
        b = hr.strang_step(st, PARAMS, 1e-3).orbitals * shift
        assert np.max(np.abs(a - b)) <= 1e-13


class TestEnergy:
    def test_plane_wave_closed_form(self):
        k = (3, 1)
        p = hr.PhysicalParams(0.1, 0.7)
        st = plane_wave_state(G64, k)
        ksq = sum(ki**2 for ki in k)
        expected = 0.5 * p.hbar**2 * 4 * np.pi**2 * ksq
        assert abs(hr.kinetic_energy(st, p) - expected) <= 1e-12 * expected
        assert hr.potential_energy(st, p) <= 1e-28

    def test_two_mode_potential_part(self):
        xs = mesh(G64)
        phi = np.sqrt(1.0 + np.cos(2 * np.pi * xs[0]))
        phi = phi / np.sqrt(np.mean(phi**2))
        st = hr.MixedState(G64, phi[None].astype(complex), np.array([1.0]))
        pot = hr.potential_energy(st, hr.PhysicalParams(1.0, 1.0))
        assert abs(pot - 1.0 / (16 * np.pi**2)) <= 1e-15

    def test_total_is_sum_of_parts(self):
        st = smooth_mixture(G64)
        assert hr.total_energy(st, PARAMS) == pytest.approx(
            hr.kinetic_energy(st, PARAMS) + hr.potential_energy(st, PARAMS),
            abs=0.0, rel=1e-15)

    def test_potential_part_nonnegative(self):
        assert hr.potential_energy(smooth_mixture(G64), PARAMS) >= 0.0

    def test_gauge_invariant_observables(self):
        st = smooth_mixture(G64)
        gauged = hr.MixedState(G64, st.orbitals * np.exp(1.91j), st.weights)
        assert np.max(np.abs(hr.density(gauged).values
                             - hr.density(st).values)) <= 1e-14
        assert np.max(np.abs(hr.current(gauged, PARAMS).components
                             - hr.current(st, PARAMS).components)) <= 1e-14
        assert abs(hr.total_energy(gauged, PARAMS)
                   - hr.total_energy(st, PARAMS)) <= 1e-14


class TestMomentumResolution:
    def test_resolved_scale_passes(self):
        # reach = 2 pi * 0.05 * 64/3 = 6.70 covers 4 * 1.5 = 6.0
        hr.require_momentum_resolution(G64, hr.PhysicalParams(0.05, 1.0), 1.5)

    def test_unresolved_scale_raises(self):
        with pytest.raises(ResolutionGuard, match="n >="):
            hr.require_momentum_resolution(G64, hr.PhysicalParams(0.05, 1.0), 1.8)

    def test_boundary_is_inclusive(self):
        p = hr.PhysicalParams(0.05, 1.0)
        reach = 2 * np.pi * p.hbar * (G64.n / 3)
        hr.require_momentum_resolution(G64, p, reach / 4.0)


class TestSerialization:
    def test_roundtrip_bit_exact(self, tmp_path):
        st = smooth_mixture(G64)
        hr.save_state(tmp_path / "state", st, PARAMS)
        back, params = hr.load_state(tmp_path / "state")
        assert np.array_equal(back.orbitals, st.orbitals)
        assert np.array_equal(back.weights, st.weights)
        assert params == PARAMS
        assert back.grid == G64

    def test_manifest_contents(self, tmp_path):
        hr.save_state(tmp_path / "s", smooth_mixture(G64), PARAMS)
        manifest = json.loads((tmp_path / "s" / "manifest.json").read_text())
        assert manifest["format"] == "mixed-state"
        assert manifest["d"] == 2 and manifest["n"] == 64
        assert len(manifest["weights"]) == len(manifest["orbitals"]) == 2

    def test_missing_manifest(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(SchemaError, match="manifest"):
            hr.load_state(tmp_path / "empty")

    def test_corrupt_manifest(self, tmp_path):
        (tmp_path / "bad").mkdir()
        (tmp_path / "bad" / "manifest.json").write_text("{not json")
        with pytest.raises(SchemaError):
            hr.load_state(tmp_path / "bad")

    def test_missing_key(self, tmp_path):
        root = tmp_path / "short"
        hr.save_state(root, smooth_mixture(G64), PARAMS)
        manifest = json.loads((root / "manifest.json").read_text())
        del manifest["weights"]
        (root / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(SchemaError, match="weights"):
            hr.load_state(root)

    def test_missing_orbital_file(self, tmp_path):
        root = tmp_path / "lost"
        hr.save_state(root, smooth_mixture(G64), PARAMS)
        (root / "orbital_0001.ell1").unlink()
        with pytest.raises(SchemaError, match="orbital_0001"):
            hr.load_state(root)

    def test_weight_count_mismatch(self, tmp_path):
        root = tmp_path / "odd"
        hr.save_state(root, smooth_mixture(G64), PARAMS)
        manifest = json.loads((root / "manifest.json").read_text())
        manifest["weights"] = [1.0]
        (root / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(SchemaError, match="weights"):
            hr.load_state(root)
