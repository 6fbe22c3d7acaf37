"""Partial-data stability experiments for time-harmonic Maxwell coefficients.

The package builds suitable domains and Kelvin images (:mod:`geometry`),
sampled fields and differential operators (:mod:`fields`), the reduction to
an augmented Schrödinger system (:mod:`reduction`), complex geometrical
optics solutions (:mod:`cgo`), a Yee forward solver with Cauchy data sets
(:mod:`forward`) and the reconstruction chain with its stability
experiment (:mod:`reconstruction`).  :mod:`verify` runs the numerical
acceptance checks and :mod:`cli` exposes everything as batch commands.
"""

from .errors import MaxstabError
from .fields import Grid3
from .geometry import DomainSpec, ValidatedDomain, build_domain
from .phantoms import CoefficientPair

__version__ = "0.1.0"

__all__ = ["CoefficientPair", "DomainSpec", "Grid3", "MaxstabError", "ValidatedDomain", "build_domain", "__version__"]
