"""Finite-volume statistical mechanics of Fermion lattice systems.

Submodules: ``car`` (regions, CAR operators, grading, embeddings),
``expectations`` (conditional expectations, commutants), ``potentials``
(standard potentials, energies, derivations), ``states`` (densities,
entropies, perturbations), ``thermo`` (Gibbs states, pressure, oracles),
``equilibrium`` (KMS, dKMS and Gibbs-condition checks) and ``cli``.
"""

from . import car, equilibrium, expectations, kernels, potentials, states, thermo
from .car import LocalOperator, Region, build_region, cube
from .potentials import Potential, field_potential, hopping_potential
from .report import Report
from .states import StateDensity

__version__ = "0.1.0"

__all__ = [
    "car",
    "equilibrium",
    "expectations",
    "kernels",
    "potentials",
    "states",
    "thermo",
    "LocalOperator",
    "Region",
    "Potential",
    "Report",
    "StateDensity",
    "build_region",
    "cube",
    "field_potential",
    "hopping_potential",
]
