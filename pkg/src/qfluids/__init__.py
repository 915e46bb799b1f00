"""Spectral laboratory for mean-field quantum dynamics near ideal flows.

Subpackages are organized by capability:

* :mod:`qfluids.grid` -- pseudo-spectral calculus on the unit torus
* :mod:`qfluids.coulomb` -- periodic Coulomb kernel and renormalized energies
* :mod:`qfluids.euler` -- incompressible Euler in vorticity form plus
  corrector/pressure diagnostics
* :mod:`qfluids.hartree` -- mixed-state mean-field Schroedinger dynamics
* :mod:`qfluids.wkb` -- coherent-state mixtures adapted to a carrier flow
* :mod:`qfluids.modenergy` -- modulated-energy functionals and benches
* :mod:`qfluids.experiments` -- run orchestration behind the CLI
* :mod:`qfluids.schemas` -- declared layouts of the JSON artifacts
* :mod:`qfluids.cli` -- the ``qfluids`` command line entry point
"""

__version__ = "0.1.0"
