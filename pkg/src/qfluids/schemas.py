"""Declared layouts for every JSON artifact the runners emit.

Each schema is a nested dict mapping key names to type tags.  Tags:
``"str"``, ``"int"``, ``"bool"``, ``"number"`` (int or float),
``"number_or_str"`` (numbers whose serialized form may degrade to a
string, e.g. an infinite time-step bound), ``"list"``, ``"any"``, a
nested dict (validated recursively, unknown keys rejected), or a tuple
``("map", tag)`` for dicts with arbitrary keys and uniform values.

Runners validate against these before writing; the test suite validates
the files an independent second time after reading them back.
"""

from __future__ import annotations

from .errors import SchemaError

_DT = {
    "cap": "number",
    "cfl": "number_or_str",
    "phase": "number_or_str",
    "used": "number",
    "steps": "int",
}

HARTREE_SUMMARY = {
    "run_id": "str",
    "kind": "str",
    "flow": "str",
    "d": "int",
    "n": "int",
    "hbar": "number",
    "eps": "number",
    "seed": "int",
    "dt": _DT,
    "g0": "number",
    "sup_G": "number",
    "final_G": "number",
    "min_gronwall_margin": "number",
    "c_d": "number",
    "c_dalpha": "number",
    "time_monotone": "bool",
    "rows": "int",
}

SWEEP_FITS = {
    "run_id": "str",
    "kind": "str",
    "flow": "str",
    "incomplete": "bool",
    "points": "int",
    "gronwall": {
        "c_d": "number",
        "c_dalpha": "number",
        "c_d_fit": "number",
        "safety": "number",
        "fitted_on": "str",
        "margins": ("map", "number"),
    },
    "dev_bound": {
        "C": "number",
        "C_fit": "number",
        "safety": "number",
        "fitted_on": "str",
        "ratios": ("map", "number"),
    },
    "failures": "list",
}

BENCH_LINE = {
    "kind": "str",
    "N": "int",
    "d": "int",
    "lhs": "number",
    "f_n": "number",
    "error_scale": "number",
    "fitted": "number",
    "seed": "int",
    "run_id": "str",
}

BENCH_SUMMARY = {
    "run_id": "str",
    "kind": "str",
    "bench_kind": "str",
    "d": "int",
    "lines": "int",
    "per_n": ("map", {
        "max_fitted": "number",
        "min_fitted": "number",
        "max_neg_fn_ratio": "number",
    }),
    "fitted_spread": "number",
}

EULER_SUMMARY = {
    "run_id": "str",
    "kind": "str",
    "flow": "str",
    "d": "int",
    "n": "int",
    "dt": _DT,
    "stationarity_drift": "number",
    "energy_drift_rel": "number",
    "enstrophy_drift_rel": "number",
    "rows": "int",
}

MC_REPORT = {
    "run_id": "str",
    "kind": "str",
    "d": "int",
    "n": "int",
    "n_points": "int",
    "samples": "int",
    "seed": "int",
    "closed_form": "number",
    "mc_mean": "number",
    "std_error": "number",
    "abs_dev": "number",
    "dev_over_se": "number",
}

ERROR_RECORD = {
    "run_id": "str",
    "error": "str",
    "message": "str",
}

CONFIG_ECHO = {
    "run_id": "str",
    "seed": "int",
    "config": "any",
    "resolved": "any",
}

FIELDS_MANIFEST = {
    "d": "int",
    "n": "int",
    "files": "list",
}


def _fail(path: str, why: str) -> None:
    raise SchemaError(f"artifact field {path or '<root>'}: {why}")


def _check(value, tag, path: str) -> None:
    if tag == "any":
        return
    if isinstance(tag, dict):
        if not isinstance(value, dict):
            _fail(path, f"expected object, got {type(value).__name__}")
        for key in value:
            if key not in tag:
                _fail(f"{path}.{key}", "unknown key")
        for key, sub in tag.items():
            if key not in value:
                _fail(f"{path}.{key}", "missing")
            _check(value[key], sub, f"{path}.{key}")
        return
    if isinstance(tag, tuple) and tag[0] == "map":
        if not isinstance(value, dict):
            _fail(path, f"expected object, got {type(value).__name__}")
        for key, item in value.items():
            _check(item, tag[1], f"{path}.{key}")
        return
    if tag == "str":
        ok = isinstance(value, str)
    elif tag == "int":
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif tag == "bool":
        ok = isinstance(value, bool)
    elif tag == "number":
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif tag == "number_or_str":
        ok = isinstance(value, (int, float, str)) and not isinstance(value, bool)
    elif tag == "list":
        ok = isinstance(value, list)
    else:
        raise SchemaError(f"unknown schema tag {tag!r} at {path or '<root>'}")
    if not ok:
        _fail(path, f"expected {tag}, got {type(value).__name__}")


def validate(obj, schema) -> None:
    """Raise SchemaError unless obj matches the declared layout exactly."""
    _check(obj, schema, "")
