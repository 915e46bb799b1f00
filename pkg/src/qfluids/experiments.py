"""Config-driven experiment runners behind the command line tool.

A run is described by one TOML file and produces one output directory.
Configs are validated completely before any numerics start, so an
invalid file never leaves partial artifacts behind; numerical guards
that fire mid-run write a machine-readable ``error.json`` instead.
Nothing here consults wall clocks or process ids: rerunning the same
config and seed reproduces every artifact byte for byte, at any FFT
worker count.

Run kinds
---------
``hartree-run``
    Evolve a coherent-state mixture riding a named carrier flow and
    report the modulated energy at a fixed cadence.  Emits ``run.csv``
    (one EnergyReport row per report time), ``summary.json``,
    ``config.json``, and final density/current dumps under ``fields/``.
``sweep``
    The same run over a grid of (hbar, eps) pairs, coarse to fine.  The
    Gronwall envelope constants are fitted once, on the coarsest point
    only, and frozen for every other point: the additive constant is
    pinned to zero (measured growth is eps-flat, so the eps^2-weighted
    channel transfers nothing) and the exponential constant is the
    minimal coarse fit inflated by a declared safety factor.  Emits
    per-point run directories plus ``aggregate.csv``, ``slopes.csv``,
    and ``fits.json``; points whose guards fire are recorded as
    failures and the aggregate is marked incomplete.
``bench``
    Inequality benches over a particle-count list times a seed range,
    one JSON line each, plus per-N aggregates in ``summary.json``.
``euler-test``
    Advance a named d=2 flow and report the stationarity and invariant
    drifts of the vorticity solver.
``fn-mc``
    Compare the Monte Carlo estimate of the renormalized-energy
    expectation against its closed form.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import euler as eu
from . import grid as gr
from . import hartree as hr
from . import modenergy as me
from . import schemas
from . import wkb
from .errors import ConfigError, EmptyPlan, GuardError, SchemaError

KINDS = ("hartree-run", "sweep", "bench", "euler-test", "fn-mc")

AGGREGATE_HEADER = "hbar,eps,sup_G,dev_rho,dev_J,scaling"
SLOPES_HEADER = "x,fixed,y,slope,residual"

_DEV_BOUND_SAFETY = 3.0  # inflation of the coarse-fitted dev_J^2 <= C*G constant
_AUTO_N_FLOOR, _AUTO_N_CAP = 64, 512


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    """Validated, normalized contents of one experiment config file."""

    kind: str
    seed: int
    raw: dict  # parsed payload, echoed into artifacts and hashed into run ids
    d: int = 2
    n: object = "auto"  # int, or "auto" for the resolution rule
    flow: str = ""
    amplitude: float = 1.0
    hbar_list: tuple = ()
    eps_list: tuple = ()
    packets: int = 8
    width: float | None = None  # None means sqrt(hbar)
    q_amp: float = 0.0
    horizon: float = 0.5
    dt_cap: float = 2e-3
    cadence: int = 10
    c_d: float = 1.0
    c_dalpha: float = 1.0
    safety: float = 3.0
    n_particles: int = 1024
    bench_kind: str = "commutator"
    bench_n: tuple = ()
    bench_seeds: int = 0
    bench_amp: float = 0.25
    mc_points: int = 64
    mc_samples: int = 10000
    mc_density: tuple = (0.5, 0, 1)  # amplitude, axis, frequency


_TABLES = {
    "grid": {"d": int, "n": (int, str)},
    "flow": {"name": str, "amplitude": (int, float)},
    "params": {"hbar": (int, float, list), "eps": (int, float, list)},
    "wkb": {"packets_per_axis": int, "width": (int, float, str)},
    "init": {"density_perturbation": (int, float)},
    "time": {"horizon": (int, float), "dt_cap": (int, float), "cadence": int},
    "gronwall": {"c_d": (int, float), "c_dalpha": (int, float),
                 "safety": (int, float)},
    "scaling": {"n_particles": int},
    "bench": {"kind": str, "n_list": list, "seed_count": int,
              "amplitude": (int, float)},
    "mc": {"n_points": int, "samples": int, "density_amplitude": (int, float),
           "density_axis": int, "density_freq": int},
}

_REQUIRED = {
    "hartree-run": ("grid", "flow", "params", "time"),
    "sweep": ("grid", "flow", "params", "time"),
    "bench": ("grid", "bench"),
    "euler-test": ("grid", "flow", "time"),
    "fn-mc": ("grid", "mc"),
}


def _check_tables(payload: dict) -> None:
    for key, value in payload.items():
        if key == "kind":
            if not isinstance(value, str):
                raise SchemaError("kind must be a string")
        elif key == "seed":
            if isinstance(value, bool) or not isinstance(value, int):
                raise SchemaError("seed must be an integer")
        elif key in _TABLES:
            if not isinstance(value, dict):
                raise SchemaError(f"[{key}] must be a table")
            for sub, item in value.items():
                want = _TABLES[key].get(sub)
                if want is None:
                    raise SchemaError(f"unknown key {key}.{sub}")
                if isinstance(item, bool) or not isinstance(item, want):
                    raise SchemaError(
                        f"{key}.{sub} has the wrong type {type(item).__name__}")
        else:
            raise SchemaError(f"unknown table or key {key!r}")


def _positive(value, name: str, strict: bool = True) -> float:
    value = float(value)
    if not math.isfinite(value) or (value <= 0.0 if strict else value < 0.0):
        raise ConfigError(f"{name} must be {'positive' if strict else 'nonnegative'}"
                          f" and finite, got {value}")
    return value


def _param_list(raw, name: str) -> tuple:
    values = raw if isinstance(raw, list) else [raw]
    if not values:
        raise ConfigError(f"params.{name} list is empty")
    out = tuple(_positive(v, f"params.{name}") for v in values)
    if len(set(out)) != len(out):
        raise ConfigError(f"params.{name} has duplicate entries")
    return out


def load_config(path) -> RunConfig:
    """Parse and fully validate one config file; no numerics run here."""
    try:
        payload = tomllib.loads(Path(path).read_text())
    except tomllib.TOMLDecodeError as err:
        raise SchemaError(f"config is not valid TOML: {err}") from None
    _check_tables(payload)

    kind = payload.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {', '.join(KINDS)}, got {kind!r}")
    for table in _REQUIRED[kind]:
        if table not in payload:
            raise SchemaError(f"kind {kind} requires a [{table}] table")

    seed = int(payload.get("seed", 0))
    if not 0 <= seed < 2**64:
        raise ConfigError(f"seed must fit in 64 unsigned bits, got {seed}")

    grid_t = payload["grid"]
    d = grid_t.get("d", 2)
    if d not in (2, 3):
        raise ConfigError(f"grid.d must be 2 or 3, got {d}")
    n = grid_t.get("n", "auto")
    if isinstance(n, str) and n != "auto":
        raise ConfigError(f"grid.n must be an integer or 'auto', got {n!r}")
    if kind in ("bench", "euler-test", "fn-mc") and not isinstance(n, int):
        raise ConfigError(f"kind {kind} needs an explicit grid.n")

    cfg = {"kind": kind, "seed": seed, "raw": payload, "d": d, "n": n}

    if "flow" in payload:
        flow_t = payload["flow"]
        if "name" not in flow_t:
            raise SchemaError("flow.name is required")
        if flow_t["name"] not in eu.FLOW_NAMES:
            raise ConfigError(f"unknown flow {flow_t['name']!r}; "
                              f"have {', '.join(eu.FLOW_NAMES)}")
        cfg["flow"] = flow_t["name"]
        cfg["amplitude"] = _positive(flow_t.get("amplitude", 1.0), "flow.amplitude")

    if "params" in payload:
        params_t = payload["params"]
        for name in ("hbar", "eps"):
            if name not in params_t:
                raise SchemaError(f"params.{name} is required")
        cfg["hbar_list"] = _param_list(params_t["hbar"], "hbar")
        cfg["eps_list"] = _param_list(params_t["eps"], "eps")
        if kind == "hartree-run" and (len(cfg["hbar_list"]) > 1
                                      or len(cfg["eps_list"]) > 1):
            raise ConfigError("hartree-run takes scalar params; lists are for sweep")

    wkb_t = payload.get("wkb", {})
    packets = wkb_t.get("packets_per_axis", 8)
    if packets < 1:
        raise ConfigError(f"wkb.packets_per_axis must be >= 1, got {packets}")
    cfg["packets"] = packets
    width = wkb_t.get("width", "auto")
    if isinstance(width, str):
        if width != "auto":
            raise ConfigError(f"wkb.width must be a number or 'auto', got {width!r}")
        cfg["width"] = None
    else:
        cfg["width"] = _positive(width, "wkb.width")

    init_t = payload.get("init", {})
    q_amp = float(init_t.get("density_perturbation", 0.0))
    if not math.isfinite(q_amp):
        raise ConfigError("init.density_perturbation must be finite")
    cfg["q_amp"] = q_amp

    if "time" in payload:
        time_t = payload["time"]
        cfg["horizon"] = _positive(time_t.get("horizon", 0.5), "time.horizon",
                                   strict=False)
        cfg["dt_cap"] = _positive(time_t.get("dt_cap", 2e-3), "time.dt_cap")
        cadence = time_t.get("cadence", 10)
        if cadence < 1:
            raise ConfigError(f"time.cadence must be >= 1, got {cadence}")
        cfg["cadence"] = cadence

    gron_t = payload.get("gronwall", {})
    cfg["c_d"] = _positive(gron_t.get("c_d", 1.0), "gronwall.c_d", strict=False)
    cfg["c_dalpha"] = _positive(gron_t.get("c_dalpha", 1.0), "gronwall.c_dalpha",
                                strict=False)
    cfg["safety"] = _positive(gron_t.get("safety", 3.0), "gronwall.safety")
    if cfg["safety"] < 1.0:
        raise ConfigError(f"gronwall.safety must be >= 1, got {cfg['safety']}")

    cfg["n_particles"] = payload.get("scaling", {}).get("n_particles", 1024)
    if cfg["n_particles"] < 1:
        raise ConfigError("scaling.n_particles must be >= 1")

    if "bench" in payload:
        bench_t = payload["bench"]
        bkind = bench_t.get("kind", "commutator")
        if bkind not in ("commutator", "coercivity"):
            raise ConfigError(f"bench.kind must be commutator or coercivity, "
                              f"got {bkind!r}")
        n_list = bench_t.get("n_list", [])
        if not all(isinstance(v, int) and v >= 2 for v in n_list):
            raise ConfigError("bench.n_list entries must be integers >= 2")
        if len(set(n_list)) != len(n_list):
            raise ConfigError("bench.n_list has duplicate entries")
        seed_count = bench_t.get("seed_count", 0)
        if seed_count < 0:
            raise ConfigError("bench.seed_count must be >= 0")
        cfg.update(bench_kind=bkind, bench_n=tuple(sorted(n_list)),
                   bench_seeds=seed_count,
                   bench_amp=_positive(bench_t.get("amplitude", 0.25),
                                       "bench.amplitude"))

    if "mc" in payload:
        mc_t = payload["mc"]
        n_points = mc_t.get("n_points", 64)
        if n_points < 1:
            raise ConfigError("mc.n_points must be >= 1")
        samples = mc_t.get("samples", 10000)
        amp = float(mc_t.get("density_amplitude", 0.5))
        if not abs(amp) < 1.0:
            raise ConfigError(f"mc.density_amplitude must lie in (-1, 1) so the "
                              f"density stays positive, got {amp}")
        axis = mc_t.get("density_axis", 0)
        if not 0 <= axis < d:
            raise ConfigError(f"mc.density_axis must lie in [0, {d}), got {axis}")
        freq = mc_t.get("density_freq", 1)
        if freq < 1:
            raise ConfigError(f"mc.density_freq must be >= 1, got {freq}")
        cfg.update(mc_points=n_points, mc_samples=samples,
                   mc_density=(amp, axis, freq))

    return RunConfig(**cfg)


def with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    """The same config with the seed overridden (CLI --seed)."""
    if not 0 <= seed < 2**64:
        raise ConfigError(f"seed must fit in 64 unsigned bits, got {seed}")
    return dataclasses.replace(cfg, seed=seed, raw={**cfg.raw, "seed": seed})


# --------------------------------------------------------------------------
# artifact plumbing


def _plain(obj):
    if isinstance(obj, dict):
        return {key: _plain(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(value) for value in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else str(value)
    return obj


def canonical_json(payload) -> str:
    return json.dumps(_plain(payload), sort_keys=True, separators=(",", ":"))


def _run_id(payload) -> str:
    return hashlib.sha1(canonical_json(payload).encode()).hexdigest()[:12]


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_json(path: Path, obj: dict, schema) -> None:
    obj = _plain(obj)
    schemas.validate(obj, schema)
    _write(path, canonical_json(obj) + "\n")


def _write_error(out: Path, run_id: str, err: Exception) -> None:
    record = {"run_id": run_id, "error": type(err).__name__, "message": str(err)}
    _write_json(Path(out) / "error.json", record, schemas.ERROR_RECORD)


def _csv(header: str, rows) -> str:
    return "\n".join([header, *rows]) + "\n"


# --------------------------------------------------------------------------
# hartree simulation core


@dataclass
class HartreeRun:
    """In-memory result of one modulated-energy evolution."""

    grid: gr.GridSpec
    params: hr.PhysicalParams
    reports: list  # EnergyReport per report time, gronwall_rhs not yet set
    history: list  # FlowSnapshot per report time
    state: hr.MixedState  # final
    bounds: dict
    width: float


def _auto_n(d: int, hbar: float, sigma: float, u_sup: float) -> int:
    """Smallest power-of-two resolution clearing both band guards."""
    n = _AUTO_N_FLOOR
    while n < _AUTO_N_CAP:
        reach = 2.0 * np.pi * hbar * (n / 3.0)
        slack = 2.0 * np.pi * sigma * (n / 3.0 - u_sup / (2.0 * np.pi * hbar))
        if reach + 1e-12 >= 4.0 * u_sup and slack >= wkb._TAIL:
            return n
        n *= 2
    return _AUTO_N_CAP  # downstream guards reject it honestly if still short


def _carrier(cfg: RunConfig, g: gr.GridSpec) -> gr.VectorField:
    base = eu.named_flow(cfg.flow, g)
    return gr.VectorField(g, cfg.amplitude * base.components)


def _simulate(cfg: RunConfig, hbar: float, eps: float) -> HartreeRun:
    params = hr.PhysicalParams(hbar, eps)
    sigma = cfg.width if cfg.width is not None else math.sqrt(hbar)
    n = cfg.n if isinstance(cfg.n, int) else _auto_n(
        cfg.d, hbar, sigma, cfg.amplitude)
    if n % cfg.packets != 0:
        raise ConfigError(f"packets_per_axis {cfg.packets} does not divide "
                          f"resolution {n}")
    g = gr.GridSpec(cfg.d, n)
    u = _carrier(cfg, g)
    u_sup = float(np.max(np.abs(u.components)))
    hr.require_momentum_resolution(g, params, u_sup)
    snap0 = eu.flow_snapshot(u, t=0.0)

    coords = g.coords()
    pert = cfg.q_amp * np.cos(2.0 * np.pi * coords[0]) + np.zeros(g.shape)
    rho0 = gr.ScalarField(g, 1.0 + eps**2 * (snap0.corrector.values + pert))
    state = wkb.monokinetic_mixture(u, rho0, g, params, cfg.packets,
                                    width=cfg.width)

    cfl = 0.5 * g.h / u_sup if u_sup > 0 else math.inf
    pot_sup = float(np.max(np.abs(gr.invlap_drop_mean(rho0.values, g).real)))
    phase = np.pi * hbar * eps**2 / pot_sup if pot_sup > 0 else math.inf
    dt = min(cfg.dt_cap, cfl, phase)
    if cfg.horizon > 0:
        steps = max(1, math.ceil(cfg.horizon / dt - 1e-12))
        dt_used = cfg.horizon / steps
    else:
        steps, dt_used = 0, 0.0
    bounds = {"cap": cfg.dt_cap, "cfl": cfl, "phase": phase,
              "used": dt_used, "steps": steps}

    def observe(current, t):
        snap = snap0 if t == 0.0 else dataclasses.replace(snap0, t=t)
        rep = me.modulated_energy(current, snap, params)
        dev_rho, dev_j = me.deviation_norms(current, snap, params)
        return dataclasses.replace(rep, dev_rho=dev_rho, dev_J=dev_j), snap

    rep, snap = observe(state, 0.0)
    reports, history = [rep], [snap]
    for k in range(steps):
        state = hr.strang_step(state, params, dt_used)
        if (k + 1) % cfg.cadence == 0 or k + 1 == steps:
            rep, snap = observe(state, (k + 1) * dt_used)
            reports.append(rep)
            history.append(snap)
    return HartreeRun(g, params, reports, history, state, bounds, sigma)


def _attach_rhs(run: HartreeRun, c_d: float, c_dalpha: float) -> list:
    g0 = run.reports[0].total
    return [dataclasses.replace(
        rep, gronwall_rhs=me.gronwall_rhs(g0, run.history, run.params.eps,
                                          rep.t, c_d=c_d, c_dalpha=c_dalpha))
        for rep in run.reports]


def _fit_exponent(run: HartreeRun) -> float:
    """Minimal exponential constant whose envelope clears every report.

    All growth is attributed to the exponential channel (additive
    constant zero); the envelope is monotone in the constant, so a
    bisection over the report times is exact to the bracket width.
    """
    g0 = run.reports[0].total
    eps = run.params.eps

    def holds(c: float) -> bool:
        return all(
            rep.total <= me.gronwall_rhs(g0, run.history, eps, rep.t,
                                         c_d=c, c_dalpha=0.0)
            for rep in run.reports)

    hi = 1.0
    while not holds(hi):
        hi *= 2.0
        if hi > 2.0**40:
            raise GuardError("envelope fit diverged; growth is not exponential")
    lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if holds(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _min_margin(reports) -> float:
    # at t=0 the envelope equals g0 identically, so only t > 0 informs
    tail = [rep.gronwall_rhs - rep.total for rep in reports if rep.t > 0.0]
    return min(tail) if tail else 0.0


def _hartree_summary(run_id: str, cfg: RunConfig, hbar: float, eps: float,
                     run: HartreeRun, reports, c_d: float,
                     c_dalpha: float) -> dict:
    times = [rep.t for rep in reports]
    return {
        "run_id": run_id,
        "kind": "hartree-run",
        "flow": cfg.flow,
        "d": run.grid.d,
        "n": run.grid.n,
        "hbar": hbar,
        "eps": eps,
        "seed": cfg.seed,
        "dt": run.bounds,
        "g0": reports[0].total,
        "sup_G": max(rep.total for rep in reports),
        "final_G": reports[-1].total,
        "min_gronwall_margin": _min_margin(reports),
        "c_d": c_d,
        "c_dalpha": c_dalpha,
        "time_monotone": bool(all(b > a for a, b in zip(times, times[1:]))),
        "rows": len(reports),
    }


def _dump_fields(out: Path, run: HartreeRun) -> None:
    fields = Path(out) / "fields"
    fields.mkdir(parents=True, exist_ok=True)
    rho = hr.density(run.state)
    current = hr.current(run.state, run.params)
    files = ["rho_final.npy"]
    np.save(fields / files[0], rho.values)
    for a in range(run.grid.d):
        name = f"j{a + 1}_final.npy"
        np.save(fields / name, current.components[a])
        files.append(name)
    _write_json(fields / "fields.json",
                {"d": run.grid.d, "n": run.grid.n, "files": files},
                schemas.FIELDS_MANIFEST)


def _write_run_dir(out: Path, cfg: RunConfig, run_id: str, run: HartreeRun,
                   reports, summary: dict) -> None:
    out = Path(out)
    _write(out / "run.csv",
           _csv(me.ENERGY_HEADER, (me.energy_csv_row(r) for r in reports)))
    _write_json(out / "summary.json", summary, schemas.HARTREE_SUMMARY)
    echo = {"run_id": run_id, "seed": cfg.seed, "config": cfg.raw,
            "resolved": {"n": run.grid.n, "width": run.width}}
    _write_json(out / "config.json", echo, schemas.CONFIG_ECHO)
    _dump_fields(out, run)


# --------------------------------------------------------------------------
# runners


def _expect_kind(cfg: RunConfig, kind: str) -> None:
    if cfg.kind != kind:
        raise ConfigError(f"config kind is {cfg.kind!r}, runner wants {kind!r}")


def run_hartree(cfg: RunConfig, out) -> dict:
    _expect_kind(cfg, "hartree-run")
    out = Path(out)
    hbar, eps = cfg.hbar_list[0], cfg.eps_list[0]
    run_id = _run_id({"config": cfg.raw, "seed": cfg.seed})
    try:
        run = _simulate(cfg, hbar, eps)
    except GuardError as err:
        _write_error(out, run_id, err)
        raise
    reports = _attach_rhs(run, cfg.c_d, cfg.c_dalpha)
    summary = _hartree_summary(run_id, cfg, hbar, eps, run, reports,
                               cfg.c_d, cfg.c_dalpha)
    _write_run_dir(out, cfg, run_id, run, reports, summary)
    return summary


def _point_name(hbar: float, eps: float) -> str:
    return f"run_hb{hbar:g}_eps{eps:g}"


def _scaling_diagnostic(d: int, eps: float, n_particles: int) -> float:
    logs = 1.0 + math.log(n_particles) * (1 if d == 2 else 0)
    return logs / (eps**2 * n_particles ** (2.0 / d))


def _fit_rows(points, quantities):
    """Log-log slope rows along each sweep axis, residual included.

    quantities: point -> {name: value}; points with missing entries or
    nonpositive values are left out of that fit, and a fit needs at
    least two surviving points.
    """
    hbars = sorted({hb for hb, _ in points}, reverse=True)
    epss = sorted({ep for _, ep in points}, reverse=True)
    rows = []

    def fit(xs, names, fixed_label):
        for quantity in ("sup_G", "dev_rho", "dev_J"):
            pairs = [(x, quantities[pt][quantity])
                     for x, pt in zip(xs, names)
                     if pt in quantities and quantities[pt][quantity] > 0.0]
            if len(pairs) < 2:
                continue
            lx = np.log([p[0] for p in pairs])
            ly = np.log([p[1] for p in pairs])
            design = np.stack([lx, np.ones_like(lx)], axis=1)
            sol, res, _, _ = np.linalg.lstsq(design, ly, rcond=None)
            residual = float(res[0]) if res.size else 0.0
            rows.append((fixed_label[0], fixed_label[1], quantity,
                         float(sol[0]), residual))

    for hb in hbars:
        fit(epss, [(hb, ep) for ep in epss], ("eps", f"hbar={hb:.17g}"))
    for ep in epss:
        fit(hbars, [(hb, ep) for hb in hbars], ("hbar", f"eps={ep:.17g}"))
    return ["%s,%s,%s,%.17g,%.17g" % row for row in rows]


def run_sweep(cfg: RunConfig, out) -> dict:
    _expect_kind(cfg, "sweep")
    out = Path(out)
    hbars = tuple(sorted(cfg.hbar_list, reverse=True))
    epss = tuple(sorted(cfg.eps_list, reverse=True))
    points = [(hb, ep) for hb in hbars for ep in epss]
    sweep_id = _run_id({"config": cfg.raw, "seed": cfg.seed})

    coarse_pt = points[0]
    try:
        coarse = _simulate(cfg, *coarse_pt)
    except GuardError as err:
        _write_error(out, sweep_id, err)  # no fit without the coarsest run
        raise
    c_fit = _fit_exponent(coarse)
    c_frozen = cfg.safety * c_fit

    runs = {coarse_pt: coarse}
    failures = []
    for pt in points[1:]:
        try:
            runs[pt] = _simulate(cfg, *pt)
        except GuardError as err:
            failures.append({"point": {"hbar": pt[0], "eps": pt[1]},
                             "error": type(err).__name__,
                             "message": str(err)})
            _write_error(out / _point_name(*pt),
                         _run_id({"config": cfg.raw, "seed": cfg.seed,
                                  "point": {"hbar": pt[0], "eps": pt[1]}}),
                         err)

    margins, quantities, agg_rows = {}, {}, []
    for pt in points:
        if pt not in runs:
            continue
        hbar, eps = pt
        run = runs[pt]
        reports = _attach_rhs(run, c_frozen, 0.0)
        name = _point_name(hbar, eps)
        point_id = _run_id({"config": cfg.raw, "seed": cfg.seed,
                            "point": {"hbar": hbar, "eps": eps}})
        summary = _hartree_summary(point_id, cfg, hbar, eps, run, reports,
                                   c_frozen, 0.0)
        summary["kind"] = "hartree-run"
        _write_run_dir(out / name, cfg, point_id, run, reports, summary)
        margins[name] = _min_margin(reports)
        final = reports[-1]
        quantities[pt] = {"sup_G": max(r.total for r in reports),
                          "dev_rho": final.dev_rho, "dev_J": final.dev_J,
                          "final_G": final.total}
        agg_rows.append("%.17g,%.17g,%.17g,%.17g,%.17g,%.17g" % (
            hbar, eps, quantities[pt]["sup_G"], final.dev_rho, final.dev_J,
            _scaling_diagnostic(cfg.d, eps, cfg.n_particles)))

    _write(out / "aggregate.csv", _csv(AGGREGATE_HEADER, agg_rows))
    _write(out / "slopes.csv", _csv(SLOPES_HEADER, _fit_rows(points, quantities)))

    coarse_name = _point_name(*coarse_pt)
    coarse_q = quantities[coarse_pt]
    dev_c_fit = coarse_q["dev_J"] ** 2 / coarse_q["final_G"]
    dev_c = _DEV_BOUND_SAFETY * dev_c_fit
    ratios = {_point_name(*pt): q["dev_J"] ** 2 / (dev_c * q["final_G"])
              for pt, q in quantities.items()}
    fits = {
        "run_id": sweep_id,
        "kind": "sweep",
        "flow": cfg.flow,
        "incomplete": bool(failures),
        "points": len(runs),
        "gronwall": {"c_d": c_frozen, "c_dalpha": 0.0, "c_d_fit": c_fit,
                     "safety": cfg.safety, "fitted_on": coarse_name,
                     "margins": margins},
        "dev_bound": {"C": dev_c, "C_fit": dev_c_fit,
                      "safety": _DEV_BOUND_SAFETY, "fitted_on": coarse_name,
                      "ratios": ratios},
        "failures": failures,
    }
    _write_json(out / "fits.json", fits, schemas.SWEEP_FITS)
    return fits


def run_bench(cfg: RunConfig, out) -> dict:
    _expect_kind(cfg, "bench")
    out = Path(out)
    seeds = [cfg.seed + i for i in range(cfg.bench_seeds)]
    if not cfg.bench_n or not seeds:
        raise EmptyPlan("bench plan has no particle counts or no seeds")
    run_id = _run_id({"config": cfg.raw, "seed": cfg.seed})

    g = gr.GridSpec(cfg.d, cfg.n)
    mu = gr.ScalarField(g, np.ones(g.shape))
    if cfg.bench_kind == "commutator":
        shear = "shear-2d" if cfg.d == 2 else "shear-3d"
        field = gr.VectorField(g, cfg.bench_amp
                               * eu.named_flow(shear, g).components)
        bench = lambda n, s: me.commutator_bench(field, mu, n, s)
    else:
        coords = g.coords()
        values = cfg.bench_amp * np.cos(2.0 * np.pi * coords[0]) \
            + np.zeros(g.shape)
        test_fn = gr.ScalarField(g, values)
        bench = lambda n, s: me.coercivity_bench(test_fn, mu, n, s)

    lines, per_n = [], {}
    for n_points in cfg.bench_n:
        fitted, neg = [], []
        for seed in seeds:
            report = bench(n_points, seed)
            record = report.as_dict()
            record["run_id"] = run_id
            record = _plain(record)
            schemas.validate(record, schemas.BENCH_LINE)
            lines.append(canonical_json(record))
            fitted.append(report.fitted)
            neg.append(max(0.0, -report.fn_value) / report.error_scale)
        per_n[str(n_points)] = {"max_fitted": max(fitted),
                                "min_fitted": min(fitted),
                                "max_neg_fn_ratio": max(neg)}
    _write(out / "bench.jsonl", "\n".join(lines) + "\n")

    peaks = [agg["max_fitted"] for agg in per_n.values()]
    spread = max(peaks) / min(peaks) if min(peaks) > 0 else math.inf
    summary = {"run_id": run_id, "kind": "bench", "bench_kind": cfg.bench_kind,
               "d": cfg.d, "lines": len(lines), "per_n": per_n,
               "fitted_spread": spread}
    _write_json(out / "summary.json", summary, schemas.BENCH_SUMMARY)
    return summary


def run_euler_test(cfg: RunConfig, out) -> dict:
    _expect_kind(cfg, "euler-test")
    out = Path(out)
    run_id = _run_id({"config": cfg.raw, "seed": cfg.seed})
    g = gr.GridSpec(cfg.d, cfg.n)
    base = eu.initial_state(cfg.flow, g)
    state = eu.FlowState(gr.ScalarField(
        g, cfg.amplitude * base.vorticity.values), 0.0)
    omega0 = state.vorticity.values.copy()

    u0 = eu.velocity_from_vorticity(state.vorticity)
    u_sup = float(np.max(np.abs(u0.components)))
    cfl = 0.4 * g.h / u_sup if u_sup > 0 else math.inf
    dt = min(cfg.dt_cap, cfl)
    if cfg.horizon > 0:
        steps = max(1, math.ceil(cfg.horizon / dt - 1e-12))
        dt_used = cfg.horizon / steps
    else:
        steps, dt_used = 0, 0.0
    bounds = {"cap": cfg.dt_cap, "cfl": cfl, "phase": math.inf,
              "used": dt_used, "steps": steps}

    try:
        snaps = [eu.flow_snapshot(state)]
        for k in range(steps):
            state = eu.euler_step(state, dt_used)
            if (k + 1) % cfg.cadence == 0 or k + 1 == steps:
                snaps.append(eu.flow_snapshot(state))
    except GuardError as err:
        _write_error(out, run_id, err)
        raise
    _write(out / "run.csv",
           _csv(eu.TIMESERIES_HEADER, (eu.snapshot_csv_row(s) for s in snaps)))

    drift = float(np.max(np.abs(state.vorticity.values - omega0)))
    first, last = snaps[0], snaps[-1]
    summary = {
        "run_id": run_id, "kind": "euler-test", "flow": cfg.flow,
        "d": cfg.d, "n": cfg.n, "dt": bounds,
        "stationarity_drift": drift,
        "energy_drift_rel": abs(last.energy - first.energy)
        / max(abs(first.energy), 1e-300),
        "enstrophy_drift_rel": abs(last.enstrophy - first.enstrophy)
        / max(abs(first.enstrophy), 1e-300),
        "rows": len(snaps),
    }
    _write_json(out / "summary.json", summary, schemas.EULER_SUMMARY)
    return summary


def run_fn_mc(cfg: RunConfig, out) -> dict:
    _expect_kind(cfg, "fn-mc")
    out = Path(out)
    run_id = _run_id({"config": cfg.raw, "seed": cfg.seed})
    g = gr.GridSpec(cfg.d, cfg.n)
    amp, axis, freq = cfg.mc_density
    coords = g.coords()
    rho = gr.ScalarField(
        g, 1.0 + amp * np.cos(2.0 * np.pi * freq * coords[axis])
        + np.zeros(g.shape))
    mu = gr.ScalarField(g, np.ones(g.shape))
    closed = me.fn_expectation_closed_form(rho, mu, cfg.mc_points)
    try:
        mean, se = me.fn_expectation_monte_carlo(
            rho, mu, cfg.mc_points, cfg.mc_samples, cfg.seed)
    except GuardError as err:
        _write_error(out, run_id, err)
        raise
    summary = {
        "run_id": run_id, "kind": "fn-mc", "d": cfg.d, "n": cfg.n,
        "n_points": cfg.mc_points, "samples": cfg.mc_samples,
        "seed": cfg.seed, "closed_form": closed, "mc_mean": mean,
        "std_error": se, "abs_dev": abs(mean - closed),
        "dev_over_se": abs(mean - closed) / se if se > 0 else math.inf,
    }
    _write_json(out / "mc.json", summary, schemas.MC_REPORT)
    return summary


RUNNERS = {
    "hartree-run": run_hartree,
    "sweep": run_sweep,
    "bench": run_bench,
    "euler-test": run_euler_test,
    "fn-mc": run_fn_mc,
}
