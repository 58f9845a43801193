"""Low-density dynamical correlators of the Lieb-Liniger Bose gas.

Modules:
    bethe        Bethe equations, Gaudin matrix, solved states
    formfactor   exact finite-size field and density form factors
    pfd          numerical residue probes of the form-factor expansion
    special      chi functions, Fresnel integrals and lattice sums
    rootdensity  root densities, hole densities and dilute state sampling
    correlator   low-density field and density correlators
    oracle       Lehmann sums over exact form factors
    cli          command-line front end
"""
__version__ = "0.1.0"

from .bethe import BetheNumbers, BetheState, ModelParams, gaudin_det, solve_bethe
from .formfactor import FormFactorValue, density_ff, field_ff
from .rootdensity import RootDensity, AtomicDensity, parse_density, hole_density
from .correlator import density_correlator, field_correlator
from .special import chi

__all__ = [
    "BetheNumbers", "BetheState", "ModelParams", "gaudin_det", "solve_bethe",
    "FormFactorValue", "density_ff", "field_ff",
    "RootDensity", "AtomicDensity", "parse_density", "hole_density",
    "density_correlator", "field_correlator", "chi", "__version__",
]
