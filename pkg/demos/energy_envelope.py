"""One mean-field run against its frozen error envelope.

Builds a packet mixture that rides a weak shear flow, evolves it with the
splitting integrator, and tracks the modulated energy, the distance
between the quantum state and the carrier flow. The run artifacts land in
demo_artifacts/: a time series CSV, a summary with the envelope margin,
and the final density field. The envelope constant here is set explicitly
in the config; sweep runs instead fit it on their coarsest point and
freeze it before touching the finer ones.

Run from the repository root:

    python3 demos/energy_envelope.py
"""

import json
from pathlib import Path

from qfluids import experiments as ex

CONFIG = """
kind = "hartree-run"
seed = 0

[grid]
d = 2
n = 64

[flow]
name = "shear-2d"
amplitude = 0.05

[params]
hbar = [1e-2]
eps = [0.2]

[wkb]
packets_per_axis = 8

[time]
horizon = 0.1
dt_cap = 2e-3
cadence = 10

[gronwall]
c_d = 0.05
"""


def main() -> None:
    base = Path("demo_artifacts")
    base.mkdir(exist_ok=True)
    cfg_path = base / "envelope_demo.toml"
    cfg_path.write_text(CONFIG)

    out = base / "envelope_demo"
    summary = ex.run_hartree(ex.load_config(cfg_path), out)

    print(f"artifacts in {out}/")
    print(f"  initial modulated energy: {summary['g0']:.6e}")
    print(f"  final modulated energy:   {summary['final_G']:.6e}")
    print(f"  worst envelope margin:    {summary['min_gronwall_margin']:.3e}")
    print(f"  steps taken:              {summary['dt']['steps']}")

    print("\ntime series (t, total, envelope):")
    for line in (out / "run.csv").read_text().splitlines()[1:]:
        cells = line.split(",")
        print(f"  t={float(cells[0]):.3f}  G={float(cells[3]):.6e}  "
              f"rhs={float(cells[4]):.6e}")

    config_echo = json.loads((out / "config.json").read_text())
    print(f"\nrun id {config_echo['run_id']} reproduces this byte for byte.")


if __name__ == "__main__":
    main()
