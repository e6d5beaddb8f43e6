"""Counter-based random streams keyed by ``(master_seed, trial, purpose)``.

Every trial of an experiment draws from its own Philox stream, so results do
not depend on how trials are scheduled across workers.
"""

import numpy as np

# purpose codes; keep stable, they are part of the reproducibility contract
SPECTRUM = 0
DECOMPOSITION = 1
STATES = 2
MEASUREMENT = 3


def stream(master_seed, trial=0, purpose=0):
    """Return an independent ``numpy.random.Generator`` for one trial."""
    if master_seed < 0 or trial < 0 or purpose < 0:
        raise ValueError("seed, trial and purpose must be non-negative")
    seq = np.random.SeedSequence([int(master_seed), int(trial), int(purpose)])
    return np.random.Generator(np.random.Philox(seq))


def as_generator(rng):
    """Accept a Generator, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.default_rng()
    return stream(int(rng))
