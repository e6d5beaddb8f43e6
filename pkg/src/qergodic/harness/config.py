"""Experiment configuration: one JSON document per run."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from ..errors import ConfigError

KINDS = ("normality", "sweep", "concentration", "entropy", "quantifier", "recurrence", "equilibrium")


@dataclass
class ExperimentConfig:
    kind: str
    master_seed: int
    D: int | None = None
    n: int | None = None
    dims: list | None = None
    # spectrum
    eigenvalues: list | None = None
    energy_window: list = field(default_factory=lambda: [0.0, 1.0])
    resonance_tolerance: float = 1e-12
    max_retries: int = 100
    # decomposition / initial state
    decomposition: str = "haar"
    psi0: str = "random"
    psi0_mode: str = "fixed_eigenstate"
    eq_fraction: float | None = None
    n_small: int = 1
    # normality parameters
    epsilon: float = 0.2
    delta_prime: float = 0.1
    delta: float = 0.1
    C1: float = 10.0
    theta: float = 0.9
    k: float = 1.0
    threshold: float = 0.9
    # time grid
    T: float | None = None
    horizon_factor: float = 100.0
    samples: int = 1000
    # Monte Carlo
    trials: int = 100
    n_random_states: int = 20
    adversarial: bool = True
    compare_D: int | None = None
    # recurrence
    t_max: float | None = None
    step: float | None = None
    # acceptance thresholds
    min_fraction: float = 0.9
    normal_fraction_required: float = 0.95
    expr4_threshold: float = 0.02
    recurrence_tolerance: float = 0.5
    variance_rel_tol: float = 0.05
    mean_se_factor: float = 3.0
    epsilon_rel: float = 0.1
    out_dir: str = "out"

    # -- serialisation -------------------------------------------------

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError(["<root>: expected a JSON object"])
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        missing = [k for k in ("kind", "master_seed") if k not in data]
        errors = [f"{k}: unknown field" for k in unknown] + [f"{k}: required" for k in missing]
        if errors:
            raise ConfigError(errors)
        return cls(**data)

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"<root>: invalid JSON ({exc})"]) from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())

    # -- derived values ------------------------------------------------

    def resolved_dims(self):
        """Block sizes implied by ``dims``, ``D``/``n`` or ``eq_fraction``."""
        if self.dims is not None:
            return [int(d) for d in self.dims]
        if self.kind == "equilibrium" and self.D and self.eq_fraction is not None:
            d_eq = int(round(self.eq_fraction * self.D))
            rest = self.D - d_eq
            if rest == 0:
                return [self.D]
            return [d_eq] + [rest // max(self.n_small, 1)] * max(self.n_small, 1)
        if self.D and self.n:
            return [self.D // self.n] * self.n
        if self.D:
            return [self.D]
        return None

    def resolved_D(self):
        if self.eigenvalues is not None:
            return len(self.eigenvalues)
        if self.D is not None:
            return int(self.D)
        dims = self.resolved_dims()
        return sum(dims) if dims else None


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def validate(config):
    """Return ``"field: message"`` strings for every problem (empty when valid)."""
    c = config
    errors = []

    if c.kind not in KINDS:
        errors.append(f"kind: must be one of {', '.join(KINDS)}")
    if not _is_int(c.master_seed) or c.master_seed < 0:
        errors.append("master_seed: must be a non-negative integer")

    if c.dims is not None:
        if not isinstance(c.dims, list) or not c.dims:
            errors.append("dims: must be a non-empty list")
        else:
            for i, d in enumerate(c.dims):
                if not _is_int(d) or d < 1:
                    errors.append(f"dims[{i}]: must be a positive integer")
            if c.D is not None and all(_is_int(d) for d in c.dims) and sum(c.dims) != c.D:
                errors.append(f"dims: sum {sum(c.dims)} does not equal D = {c.D}")
    if c.D is not None and (not _is_int(c.D) or c.D < 1):
        errors.append("D: must be a positive integer")
    if c.n is not None:
        if not _is_int(c.n) or c.n < 1:
            errors.append("n: must be a positive integer")
        elif _is_int(c.D) and c.dims is None and c.D % c.n:
            errors.append(f"n: D = {c.D} is not divisible into {c.n} equal blocks")

    for name in ("epsilon", "delta_prime", "delta", "C1", "theta", "k", "threshold", "horizon_factor",
                 "resonance_tolerance", "min_fraction", "normal_fraction_required", "expr4_threshold",
                 "recurrence_tolerance", "variance_rel_tol", "mean_se_factor", "epsilon_rel"):
        v = getattr(c, name)
        if not _is_num(v) or v <= 0:
            errors.append(f"{name}: must be a positive number")
    for name in ("epsilon", "delta_prime", "theta"):
        v = getattr(c, name)
        if _is_num(v) and not v < 1:
            errors.append(f"{name}: must be below 1")
    for name in ("samples", "trials", "max_retries"):
        v = getattr(c, name)
        if not _is_int(v) or v < 1:
            errors.append(f"{name}: must be a positive integer")
    if not _is_int(c.n_random_states) or c.n_random_states < 0:
        errors.append("n_random_states: must be a non-negative integer")
    if c.T is not None and (not _is_num(c.T) or c.T <= 0):
        errors.append("T: must be a positive number")
    if (not isinstance(c.energy_window, list) or len(c.energy_window) != 2
            or not all(_is_num(x) for x in c.energy_window) or not c.energy_window[1] > c.energy_window[0]):
        errors.append("energy_window: must be [low, high] with low < high")
    if c.eigenvalues is not None:
        if not isinstance(c.eigenvalues, list) or not all(_is_num(x) for x in c.eigenvalues) or not c.eigenvalues:
            errors.append("eigenvalues: must be a non-empty list of numbers")
        elif c.D is not None and len(c.eigenvalues) != c.D:
            errors.append(f"eigenvalues: {len(c.eigenvalues)} values but D = {c.D}")
    if c.decomposition not in ("haar", "aligned"):
        errors.append("decomposition: must be 'haar' or 'aligned'")
    if c.psi0 not in ("random", "eigenstate", "block", "uniform_amplitude"):
        errors.append("psi0: must be one of random, eigenstate, block, uniform_amplitude")
    if c.psi0_mode.replace("-", "_") not in ("fixed_eigenstate", "per_decomp_random"):
        errors.append("psi0_mode: must be 'fixed_eigenstate' or 'per_decomp_random'")
    if not isinstance(c.out_dir, str) or not c.out_dir:
        errors.append("out_dir: must be a non-empty path")

    kind_needs_D = c.kind in ("normality", "sweep", "concentration", "entropy", "quantifier", "equilibrium")
    if kind_needs_D and c.resolved_D() is None:
        errors.append("D: required (or dims) for this experiment kind")
    if c.kind == "quantifier" and _is_int(c.trials) and c.trials < 10:
        errors.append("trials: quantifier experiment needs at least 10 decompositions")
    if c.kind == "concentration" and _is_int(c.trials) and c.trials < 100:
        errors.append("trials: concentration experiment needs at least 100 samples")
    if c.kind == "recurrence":
        if c.eigenvalues is None and c.D is None:
            errors.append("eigenvalues: recurrence needs eigenvalues or D")
        for name in ("t_max", "step"):
            v = getattr(c, name)
            if v is None or not _is_num(v) or v <= 0:
                errors.append(f"{name}: required positive number for recurrence")
    if c.kind == "equilibrium":
        if c.eq_fraction is None or not _is_num(c.eq_fraction) or not 0 < c.eq_fraction <= 1:
            errors.append("eq_fraction: required, in (0, 1]")
        elif _is_int(c.D):
            d_eq = int(round(c.eq_fraction * c.D))
            rest = c.D - d_eq
            if d_eq < 1:
                errors.append("eq_fraction: equilibrium block would be empty")
            elif rest and (not _is_int(c.n_small) or c.n_small < 1 or rest % c.n_small):
                errors.append(f"n_small: {rest} remaining dimensions do not split into {c.n_small} blocks")
    if c.kind == "sweep" and c.compare_D is not None:
        if not _is_int(c.compare_D) or c.compare_D < 1:
            errors.append("compare_D: must be a positive integer")
        elif _is_int(c.n) and c.compare_D % c.n:
            errors.append(f"compare_D: {c.compare_D} is not divisible into {c.n} equal blocks")
        elif c.n is None:
            errors.append("n: required when compare_D is set")
    return errors


def check(config):
    """Raise :class:`ConfigError` listing every validation problem."""
    errors = validate(config)
    if errors:
        raise ConfigError(errors)
    return config
