"""shearlab: passive-scalar advection-diffusion under cascaded shear flows on T^2.

A numerical laboratory built around an explicit cascade velocity field made
of alternating mollified shear flows at superexponentially separated scales.
It evolves the advection-diffusion equation both spectrally (exact shear
transport + exact heat semigroup, Strang-composed) and stochastically
(particle ensembles via the Feynman-Kac representation), and runs desk-scale
experiments exhibiting anomalous dissipation, the conservative/dissipative
vanishing-diffusivity dichotomy and the convolution parity-swap mechanism.
"""

from .errors import (
    ContractViolation,
    DegenerateFieldError,
    ResolutionError,
    ScheduleError,
    ShearLabError,
    SingularTimeError,
    ValidationError,
)

__version__ = "0.1.0"
