"""Energy spectra on a single micro-canonical shell and the no-resonance test."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, SamplingError
from .rng import as_generator

__all__ = [
    "Spectrum",
    "check_resonance_free",
    "resonance_gap",
    "sample_nonresonant_spectrum",
    "energies",
]


def _positive_differences(eigenvalues):
    """All ``E[i] - E[j]`` with ``E[i] >= E[j]``, sorted, with their index pairs."""
    e = np.asarray(eigenvalues, dtype=float)
    order = np.argsort(e, kind="stable")
    es = e[order]
    lo, hi = np.triu_indices(len(es), k=1)
    diffs = es[hi] - es[lo]
    srt = np.argsort(diffs, kind="stable")
    return diffs[srt], order[hi[srt]], order[lo[srt]]


def check_resonance_free(spectrum, tol=1e-12):
    """Test the no-resonance condition at absolute tolerance ``tol``.

    Two energy differences ``E_a - E_b`` and ``E_c - E_d`` count as equal when
    they lie within ``tol`` of each other. Only the D(D-1)/2 non-negative
    differences are enumerated; the negative ones are mirror images. A zero
    difference (degenerate level) collides with the trivial ``E_a - E_a``.

    Parameters
    ----------
    spectrum : Spectrum or array_like
        Eigenvalues, in any order.
    tol : float
        Non-negative collision tolerance.

    Returns
    -------
    ok : bool
    witness : tuple of 4 ints or None
        0-based indices ``(a, b, c, d)`` into the input with
        ``|(E_a - E_b) - (E_c - E_d)| <= tol`` violating the condition.
    """
    e = energies(spectrum)
    if tol < 0:
        raise ValueError("tol must be non-negative")
    if e.size < 2:
        raise DegenerateInputError("resonance check needs at least two levels")
    diffs, hi, lo = _positive_differences(e)
    if diffs[0] <= tol:
        a, b = int(hi[0]), int(lo[0])
        return False, (a, b, b, b)
    gaps = np.diff(diffs)
    bad = np.flatnonzero(gaps <= tol)
    if bad.size:
        i = int(bad[0])
        return False, (int(hi[i]), int(lo[i]), int(hi[i + 1]), int(lo[i + 1]))
    return True, None


def resonance_gap(spectrum):
    """Smallest separation between distinct energy differences.

    This is the largest tolerance at which the spectrum still passes
    :func:`check_resonance_free` (zero differences included). Returns ``inf``
    for a single level.
    """
    e = energies(spectrum)
    if e.size < 2:
        return np.inf
    diffs = _positive_differences(e)[0]
    if diffs.size == 1:
        return float(diffs[0])
    return float(min(diffs[0], np.min(np.diff(diffs))))


@dataclass(frozen=True)
class Spectrum:
    """Sorted eigenvalues of H restricted to the energy shell (hbar = 1)."""

    eigenvalues: np.ndarray
    resonance_tolerance: float = 1e-12
    resonance_free: bool = field(init=False)

    def __post_init__(self):
        e = np.array(self.eigenvalues, dtype=float).ravel()
        if e.size < 1:
            raise DegenerateInputError("a spectrum needs at least one level")
        if np.any(np.diff(e) < 0):
            raise ValueError("eigenvalues must be sorted non-decreasing")
        if self.resonance_tolerance < 0:
            raise ValueError("resonance_tolerance must be non-negative")
        e.setflags(write=False)
        object.__setattr__(self, "eigenvalues", e)
        free = True if e.size == 1 else check_resonance_free(e, self.resonance_tolerance)[0]
        object.__setattr__(self, "resonance_free", bool(free))

    @classmethod
    def from_values(cls, values, resonance_tolerance=1e-12):
        return cls(np.sort(np.asarray(values, dtype=float)), resonance_tolerance)

    @property
    def D(self):
        return self.eigenvalues.size

    def min_level_gap(self):
        """Smallest spacing between adjacent levels (``inf`` when D = 1)."""
        if self.D < 2:
            return np.inf
        return float(np.min(np.diff(self.eigenvalues)))

    def is_nondegenerate(self):
        return self.min_level_gap() > self.resonance_tolerance

    def to_dict(self):
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "resonance_tolerance": float(self.resonance_tolerance),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["eigenvalues"], dtype=float), float(data["resonance_tolerance"]))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, Spectrum):
            return NotImplemented
        return (
            self.resonance_tolerance == other.resonance_tolerance
            and np.array_equal(self.eigenvalues, other.eigenvalues)
        )

    __hash__ = None


def energies(spectrum):
    """Eigenvalues as a float array, from a Spectrum or any array_like."""
    if isinstance(spectrum, Spectrum):
        return spectrum.eigenvalues
    return np.asarray(spectrum, dtype=float).ravel()


def sample_nonresonant_spectrum(D, energy_window=(0.0, 1.0), rng=None, tol=1e-12, max_retries=100):
    """Draw D i.i.d. uniform levels in ``energy_window``, rejecting resonant draws.

    Raises
    ------
    SamplingError
        If no resonance-free draw is found within ``max_retries`` attempts,
        which happens when ``tol`` is large compared to width / D**4.
    """
    if D < 1:
        raise DegenerateInputError("D must be at least 1")
    lo, hi = map(float, energy_window)
    if not hi > lo:
        raise ValueError("energy window must be non-empty")
    rng = as_generator(rng)
    for _ in range(max(1, max_retries)):
        e = np.sort(rng.uniform(lo, hi, size=D))
        spec = Spectrum(e, tol)
        if spec.resonance_free:
            return spec
    raise SamplingError(
        f"no resonance-free spectrum with D={D} at tol={tol:g} after {max_retries} draws"
    )
