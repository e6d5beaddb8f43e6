"""Finite-dimensional numerics for normal typicality on a micro-canonical shell.

Everything is expressed in the energy eigenbasis of H restricted to one energy
shell of dimension D, with hbar = 1.
"""

__version__ = "0.1.0"

from .spectra import Spectrum, check_resonance_free, sample_nonresonant_spectrum  # noqa: E402
from .sampling import (  # noqa: E402
    MacroDecomposition,
    aligned_decomposition,
    haar_unitary,
    random_decomposition,
    uniform_sphere_state,
)
from .dynamics import (  # noqa: E402
    TimeStats,
    evolve,
    macro_probabilities,
    recurrence_search,
    time_averaged_density,
    time_stats_closed_form,
    time_stats_quadrature,
)
from .typicality import compute_F, concentration_experiment, normality_verdict  # noqa: E402
from .entropy import entropy_S, entropy_qB, entropy_vN  # noqa: E402
