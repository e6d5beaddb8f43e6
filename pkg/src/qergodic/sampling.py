"""Haar-random unitaries, uniform sphere states and macro-decompositions.

All vectors and matrices are expressed in the energy eigenbasis
``phi_1, ..., phi_D``. A decomposition of the shell into orthogonal
macro-spaces is stored as a unitary ``basis`` whose consecutive column blocks
span the macro-spaces, so ``<phi_a|P_nu|phi_b>`` is a Gram product of rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DimensionMismatchError
from .rng import as_generator

__all__ = [
    "MacroDecomposition",
    "haar_unitary",
    "uniform_sphere_state",
    "random_decomposition",
    "aligned_decomposition",
    "check_unitary",
    "check_state",
]

UNITARY_TOL = 1e-12
STATE_TOL = 1e-12
CLOSURE_TOL = 1e-10


def _complex_gaussian(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def haar_unitary(D, rng=None):
    """Sample a D x D unitary from the Haar measure.

    QR-decomposes a standard complex Gaussian matrix and multiplies each
    column of Q by the phase of the matching diagonal entry of R. Without that
    correction the distribution depends on the QR convention and is not Haar.
    """
    if D < 1:
        raise DegenerateInputError("D must be at least 1")
    rng = as_generator(rng)
    z = _complex_gaussian(rng, (D, D))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def uniform_sphere_state(D, rng=None):
    """Unit vector uniformly distributed on the complex sphere in C^D."""
    if D < 1:
        raise DegenerateInputError("D must be at least 1")
    rng = as_generator(rng)
    g = _complex_gaussian(rng, D)
    return g / np.linalg.norm(g)


def uniform_sphere_states(D, count, rng=None):
    """``count`` independent uniform states as the columns of a D x count array."""
    rng = as_generator(rng)
    g = _complex_gaussian(rng, (D, count))
    return g / np.linalg.norm(g, axis=0)


def check_unitary(u, tol=UNITARY_TOL):
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))) < tol


def check_state(psi, tol=STATE_TOL):
    return abs(float(np.vdot(psi, psi).real) - 1.0) < tol


@dataclass(frozen=True)
class MacroDecomposition:
    """Orthogonal decomposition of the shell into macro-spaces of sizes ``dims``.

    Block ``nu`` of ``basis`` (columns ``offsets[nu]:offsets[nu+1]``) is an
    orthonormal basis of the macro-space, written in the energy eigenbasis.
    ``eq_index`` optionally marks the thermal-equilibrium macro-space.
    """

    dims: tuple
    basis: np.ndarray
    eq_index: int | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise DegenerateInputError("a decomposition needs at least one block")
        if any(d < 1 for d in dims):
            raise DegenerateInputError("all block dimensions must be >= 1")
        basis = np.asarray(self.basis, dtype=complex)
        D = sum(dims)
        if basis.shape != (D, D):
            raise DimensionMismatchError(f"basis shape {basis.shape} does not match sum(dims) = {D}")
        if self.eq_index is not None and not 0 <= self.eq_index < len(dims):
            raise IndexError("eq_index out of range")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "basis", basis)

    @property
    def D(self):
        return self.basis.shape[0]

    @property
    def n(self):
        return len(self.dims)

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.dims)])

    def block(self, nu):
        o = self.offsets
        return self.basis[:, o[nu]:o[nu + 1]]

    def projector(self, nu):
        b = self.block(nu)
        return b @ b.conj().T

    def diagonal_weights(self):
        """``<phi_a|P_nu|phi_a>`` as an (n, D) array."""
        w = np.abs(self.basis) ** 2
        return np.add.reduceat(w, self.offsets[:-1], axis=1).T

    def fractions(self):
        """Micro-canonical probabilities ``d_nu / D``."""
        return np.asarray(self.dims, dtype=float) / self.D

    def block_state(self, nu, k=0):
        """The k-th basis vector of macro-space ``nu`` (a state inside it)."""
        return self.block(nu)[:, k].copy()

    def validate(self, unitary_tol=UNITARY_TOL, closure_tol=CLOSURE_TOL):
        """Return a list of violated invariants (empty when valid)."""
        problems = []
        if sum(self.dims) != self.D:
            problems.append("dims do not sum to D")
        if not check_unitary(self.basis, unitary_tol):
            problems.append("basis is not unitary")
        total = sum(self.projector(nu) for nu in range(self.n))
        if float(np.max(np.abs(total - np.eye(self.D)))) >= closure_tol:
            problems.append("projectors do not sum to the identity")
        return problems

    def permuted(self, perm):
        """Same macro-spaces after relabelling energy levels: row ``i`` <- row ``perm[i]``."""
        return MacroDecomposition(self.dims, self.basis[np.asarray(perm)], self.eq_index)

    def to_dict(self):
        b = self.basis
        return {
            "dims": list(self.dims),
            "eq_index": self.eq_index,
            "basis_real": b.real.ravel().tolist(),
            "basis_imag": b.imag.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        dims = tuple(data["dims"])
        D = sum(dims)
        b = np.asarray(data["basis_real"], float) + 1j * np.asarray(data["basis_imag"], float)
        return cls(dims, b.reshape(D, D), data.get("eq_index"))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        """Binary form (``.npz``)."""
        extra = {} if self.eq_index is None else {"eq_index": self.eq_index}
        np.savez(path, dims=np.asarray(self.dims), basis=self.basis, **extra)

    @classmethod
    def load(cls, path):
        with np.load(path) as z:
            eq = int(z["eq_index"]) if "eq_index" in z.files else None
            return cls(tuple(int(d) for d in z["dims"]), z["basis"], eq)

    def __eq__(self, other):
        if not isinstance(other, MacroDecomposition):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.eq_index == other.eq_index
            and np.array_equal(self.basis, other.basis)
        )

    __hash__ = None


def _check_dims(dims):
    dims = [int(d) for d in dims]
    if not dims:
        raise DegenerateInputError("dims must be non-empty")
    if any(d < 1 for d in dims):
        raise DegenerateInputError("all block dimensions must be >= 1")
    return dims


def random_decomposition(dims, rng=None, eq_index=None):
    """Uniformly random decomposition with the given block sizes (Haar image)."""
    dims = _check_dims(dims)
    return MacroDecomposition(tuple(dims), haar_unitary(sum(dims), rng), eq_index)


def aligned_decomposition(dims, eq_index=None):
    """Decomposition whose macro-spaces are spanned by consecutive energy eigenvectors.

    Every P_nu is diagonal in the energy eigenbasis, so energy eigenstates stay
    inside one macro-space forever: the adversarial case for normality.
    """
    dims = _check_dims(dims)
    D = sum(dims)
    return MacroDecomposition(tuple(dims), np.eye(D, dtype=complex), eq_index)
