"""Jointly stationary d-Markov process triples (X, Y, Z) on finite alphabets.

A model is given by three conditional kernels, one per process, each indexed
by the joint context of the previous ``d`` steps.  The next-step joint law is
always the product of the three kernels, i.e. X_i, Y_i and Z_i are
conditionally independent given the shared past.

Context indexing: a joint symbol is ``j = (x * |Y| + y) * |Z| + z`` and a
context is ``c = sum_l j_l * J**(d - l)`` over lags ``l = 1..d`` (lag 1 is the
most significant digit).  Kernels are stored as ``(J**d, m)`` arrays.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .errors import (
    ConvergenceError,
    MaskError,
    NormalizationError,
    ReducibleChainError,
    SelectorError,
    ShapeError,
    SizeError,
    ValidationError,
)

PROCESSES = ("X", "Y", "Z")
ROW_TOL = 1e-12
ZERO_PROB = 1e-300
DEFAULT_SIZE_CAP = 10**8


def _proc_index(process: str) -> int:
    try:
        return PROCESSES.index(process)
    except ValueError:
        raise ValidationError(f"unknown process {process!r}") from None


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlphabetSpec:
    """Alphabet sizes; ``z_size == 1`` means there is no side process."""

    x_size: int
    y_size: int
    z_size: int = 1

    def __post_init__(self):
        for name in ("x_size", "y_size", "z_size"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
        if self.x_size < 2 or self.y_size < 2:
            raise ValidationError("x_size and y_size must be at least 2")

    @property
    def sizes(self) -> tuple[int, int, int]:
        return (int(self.x_size), int(self.y_size), int(self.z_size))

    @property
    def joint_size(self) -> int:
        return self.x_size * self.y_size * self.z_size

    def size_of(self, process: str) -> int:
        return self.sizes[_proc_index(process)]

    @classmethod
    def parse(cls, text: str) -> "AlphabetSpec":
        """Parse ``"4,4"`` or ``"4,4,2"``."""
        parts = [int(p) for p in text.split(",") if p.strip()]
        if len(parts) not in (2, 3):
            raise ValidationError(f"alphabet must be 'X,Y' or 'X,Y,Z', got {text!r}")
        return cls(*parts)


@dataclass(frozen=True)
class VariableSelector:
    """A single symbol inside a window: ``process`` at ``lag`` steps back."""

    process: str
    lag: int

    def __post_init__(self):
        _proc_index(self.process)
        if self.lag < 0:
            raise SelectorError(f"lag must be nonnegative, got {self.lag}")

    def __str__(self):
        return f"{self.process}[t-{self.lag}]" if self.lag else f"{self.process}[t]"


def sel(process: str, *lags: int) -> list[VariableSelector]:
    """Shorthand: ``sel("X", 1, 2)`` -> ``[X[t-1], X[t-2]]``."""
    return [VariableSelector(process, lag) for lag in lags]


@dataclass(frozen=True)
class StructureTemplate:
    """Which (source, lag) parents each target process may depend on."""

    parents: Mapping[str, frozenset]
    name: str | None = None

    def __post_init__(self):
        fixed = {}
        for target in PROCESSES:
            entries = frozenset((str(s), int(k)) for s, k in self.parents.get(target, ()))
            for s, k in entries:
                _proc_index(s)
                if k < 1:
                    raise MaskError(f"parent lag must be >= 1, got {k}")
            fixed[target] = entries
        object.__setattr__(self, "parents", fixed)

    @property
    def max_lag(self) -> int:
        return max((k for ps in self.parents.values() for _, k in ps), default=0)

    def mask(self, target: str, d: int) -> np.ndarray:
        """Boolean ``(d, 3)`` array: ``mask[lag - 1, source]``."""
        if self.max_lag > d:
            raise MaskError(f"template references lag {self.max_lag} > order {d}")
        m = np.zeros((d, 3), dtype=bool)
        for s, k in self.parents[target]:
            m[k - 1, _proc_index(s)] = True
        return m

    def has_edge(self, source: str, target: str) -> bool:
        return any(s == source for s, _ in self.parents[target])

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "parents": {t: sorted([s, k] for s, k in ps) for t, ps in self.parents.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "StructureTemplate":
        parents = {t: frozenset((s, int(k)) for s, k in ps) for t, ps in data["parents"].items()}
        return cls(parents, data.get("name"))

    @classmethod
    def full(cls, d: int, processes: Iterable[str] = PROCESSES) -> "StructureTemplate":
        procs = list(processes)
        ps = frozenset((s, k) for s in procs for k in range(1, d + 1))
        return cls({t: ps for t in procs}, f"full{d}")


def _preset(name, x=(), y=(), z=()):
    return StructureTemplate({"X": frozenset(x), "Y": frozenset(y), "Z": frozenset(z)}, name)


STRUCTURES = {
    "S1": _preset("S1", x=[("Y", 1)], y=[("Y", 1)]),
    "S2": _preset("S2", x=[("X", 1), ("Y", 1)], y=[("Y", 1)]),
    "S3": _preset("S3", x=[("X", 1), ("Y", 1)], y=[("X", 1), ("Y", 1)]),
    "S4": _preset(
        "S4",
        x=[("X", 1), ("X", 2), ("Y", 1), ("Y", 2)],
        y=[("X", 1), ("X", 2), ("Y", 1), ("Y", 2)],
    ),
}

# (alphabet, order) used for each structure in the published experiments
STRUCTURE_DEFAULTS = {
    "S1": (AlphabetSpec(4, 4), 1),
    "S2": (AlphabetSpec(4, 4), 1),
    "S3": (AlphabetSpec(4, 4), 1),
    "S4": (AlphabetSpec(3, 3), 2),
}


def get_structure(name: str) -> StructureTemplate:
    try:
        return STRUCTURES[name.upper()]
    except KeyError:
        raise ValidationError(f"unknown structure {name!r}; expected one of {sorted(STRUCTURES)}") from None


@dataclass(frozen=True, eq=False)
class TransitionModel:
    """Per-process next-symbol kernels over the joint d-step context."""

    alphabet: AlphabetSpec
    order: int
    kernel_x: np.ndarray
    kernel_y: np.ndarray
    kernel_z: np.ndarray
    template: StructureTemplate | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.order < 1:
            raise ShapeError(f"order must be >= 1, got {self.order}")
        for name in ("kernel_x", "kernel_y", "kernel_z"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_contexts(self) -> int:
        return self.alphabet.joint_size**self.order

    @property
    def kernels(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.kernel_x, self.kernel_y, self.kernel_z)

    def kernel(self, process: str) -> np.ndarray:
        return self.kernels[_proc_index(process)]

    def kernel_tensor(self, process: str) -> np.ndarray:
        """Kernel reshaped to ``(|X|, |Y|, |Z|) * d + (m,)``, lag 1 first."""
        k = self.kernel(process)
        return k.reshape(self.alphabet.sizes * self.order + (k.shape[1],))

    @property
    def n_free_parameters(self) -> int:
        nx, ny, nz = self.alphabet.sizes
        return (nx + ny + nz - 3) * self.n_contexts

    @property
    def strictly_positive(self) -> bool:
        return all(bool(np.all(k > 0)) for k in self.kernels)

    def joint_kernel(self) -> np.ndarray:
        """``(C, J)`` next-step joint law, the product of the three kernels."""
        kx, ky, kz = self.kernels
        return (kx[:, :, None, None] * ky[:, None, :, None] * kz[:, None, None, :]).reshape(
            self.n_contexts, -1
        )

    # serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        shape = self.alphabet.sizes * self.order
        return {
            "alphabet": {
                "x_size": self.alphabet.x_size,
                "y_size": self.alphabet.y_size,
                "z_size": self.alphabet.z_size,
            },
            "order": self.order,
            "template": None if self.template is None else self.template.to_dict(),
            "seed": self.seed,
            "kernels": {
                p.lower(): k.reshape(shape + (k.shape[1],)).tolist()
                for p, k in zip(PROCESSES, self.kernels)
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TransitionModel":
        alphabet = AlphabetSpec(**data["alphabet"])
        d = int(data["order"])
        C = alphabet.joint_size**d
        kernels = []
        for p, m in zip("xyz", alphabet.sizes):
            arr = np.asarray(data["kernels"][p], dtype=float)
            if arr.size != C * m:
                raise ShapeError(f"kernel {p} has {arr.size} entries, expected {C * m}")
            kernels.append(arr.reshape(C, m))
        template = data.get("template")
        return cls(
            alphabet,
            d,
            *kernels,
            template=None if template is None else StructureTemplate.from_dict(template),
            seed=data.get("seed"),
        )

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict())
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, text_or_path: str | Path) -> "TransitionModel":
        if isinstance(text_or_path, Path) or not str(text_or_path).lstrip().startswith("{"):
            text_or_path = Path(text_or_path).read_text()
        return cls.from_dict(json.loads(text_or_path))


@dataclass(frozen=True)
class ValidationReport:
    normalized: bool
    shapes_consistent: bool
    strictly_positive: bool
    max_row_error: float


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    """Invariant law of the lifted chain over joint d-tuples.

    ``probs[c]`` uses the kernel context index: lag 1 is the most significant
    digit of ``c``.
    """

    probs: np.ndarray
    matrix: np.ndarray
    alphabet: AlphabetSpec
    order: int
    residual: float
    method: str

    def support(self) -> np.ndarray:
        """``(C, d, 3)`` array of (x, y, z) per lag, lag 1 first."""
        return decode_contexts(np.arange(self.probs.size), self.alphabet, self.order)

    def tensor(self) -> np.ndarray:
        """Probabilities shaped ``(|X|, |Y|, |Z|) * d`` with lag 1 first."""
        return self.probs.reshape(self.alphabet.sizes * self.order)


@dataclass(frozen=True, eq=False)
class WindowDistribution:
    """Exact law of a stationary window of ``length`` consecutive steps.

    Only the listed ``variables`` are represented (all of them for a full
    window).  Storage is sparse: flat indices into ``shape`` plus their
    probabilities; zero-probability entries are omitted.
    """

    length: int
    variables: tuple[VariableSelector, ...]
    shape: tuple[int, ...]
    index: np.ndarray
    probs: np.ndarray

    @classmethod
    def from_dense(cls, length, variables, dense: np.ndarray) -> "WindowDistribution":
        flat = dense.ravel()
        idx = np.flatnonzero(flat > ZERO_PROB)
        return cls(length, tuple(variables), tuple(dense.shape), idx, flat[idx].copy())

    @property
    def total_mass(self) -> float:
        return float(self.probs.sum())

    def __len__(self):
        return int(self.probs.size)

    def dense(self) -> np.ndarray:
        out = np.zeros(int(np.prod(self.shape, dtype=np.int64)))
        out[self.index] = self.probs
        return out.reshape(self.shape)

    def axis_of(self, selector: VariableSelector) -> int:
        if selector.lag >= self.length:
            raise SelectorError(f"{selector} outside window of length {self.length}")
        try:
            return self.variables.index(selector)
        except ValueError:
            raise SelectorError(f"{selector} not represented in this window") from None

    def marginal(self, selectors: Sequence[VariableSelector]) -> np.ndarray:
        """Dense marginal over ``selectors`` (in the given order)."""
        selectors = list(selectors)
        if len(set(selectors)) != len(selectors):
            raise SelectorError("duplicate selectors in marginal request")
        axes = [self.axis_of(s) for s in selectors]
        out_shape = tuple(self.shape[a] for a in axes)
        if not axes:
            return np.array(self.total_mass)
        coords = np.unravel_index(self.index, self.shape)
        flat = np.ravel_multi_index(tuple(coords[a] for a in axes), out_shape)
        size = int(np.prod(out_shape, dtype=np.int64))
        return np.bincount(flat, weights=self.probs, minlength=size).reshape(out_shape)

    def drop_newest(self) -> "WindowDistribution":
        """Marginalize out lag 0; remaining lags shift down by one."""
        return self._drop(lambda s: s.lag == 0, lambda s: VariableSelector(s.process, s.lag - 1))

    def drop_oldest(self) -> "WindowDistribution":
        """Marginalize out the oldest step (lag ``length - 1``)."""
        return self._drop(lambda s: s.lag == self.length - 1, lambda s: s)

    def _drop(self, drop, rename):
        if self.length < 2:
            raise SelectorError("cannot shorten a window of length 1")
        kept = [s for s in self.variables if not drop(s)]
        dense = self.marginal(kept)
        return WindowDistribution.from_dense(self.length - 1, [rename(s) for s in kept], dense)


@dataclass(frozen=True, eq=False)
class SampleSequence:
    x_seq: np.ndarray
    y_seq: np.ndarray
    z_seq: np.ndarray
    seed: int | None = None
    alphabet: AlphabetSpec | None = None

    def __post_init__(self):
        arrs = [np.asarray(a, dtype=np.int64) for a in (self.x_seq, self.y_seq, self.z_seq)]
        if len({a.shape for a in arrs}) != 1 or arrs[0].ndim != 1:
            raise ShapeError("x_seq, y_seq, z_seq must be 1-D arrays of equal length")
        if self.alphabet is not None:
            for a, m, p in zip(arrs, self.alphabet.sizes, PROCESSES):
                if a.size and (a.min() < 0 or a.max() >= m):
                    raise ValidationError(f"{p} symbols outside alphabet of size {m}")
        for name, a in zip(("x_seq", "y_seq", "z_seq"), arrs):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def n(self) -> int:
        return int(self.x_seq.size)

    def series(self, process: str) -> np.ndarray:
        return (self.x_seq, self.y_seq, self.z_seq)[_proc_index(process)]

    def alphabet_size(self, process: str) -> int:
        if self.alphabet is not None:
            return self.alphabet.size_of(process)
        s = self.series(process)
        return int(s.max()) + 1 if s.size else 1


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def decode_contexts(contexts: np.ndarray, alphabet: AlphabetSpec, d: int) -> np.ndarray:
    """Context indices -> ``(..., d, 3)`` symbol array, lag 1 first."""
    digits = np.unravel_index(np.asarray(contexts), alphabet.sizes * d)
    return np.stack(digits, axis=-1).reshape(np.shape(contexts) + (d, 3))


def validate_model(model: TransitionModel, require_positive: bool = False) -> ValidationReport:
    C = model.n_contexts
    max_err = 0.0
    for p, k, m in zip(PROCESSES, model.kernels, model.alphabet.sizes):
        if k.shape != (C, m):
            raise ShapeError(f"kernel_{p.lower()} has shape {k.shape}, expected {(C, m)}")
        if np.any(k < 0) or not np.all(np.isfinite(k)):
            raise NormalizationError(f"kernel_{p.lower()} has negative or non-finite entries")
        err = float(np.max(np.abs(k.sum(axis=1) - 1.0)))
        max_err = max(max_err, err)
        if err > ROW_TOL:
            raise NormalizationError(f"kernel_{p.lower()} row sums deviate from 1 by {err:.3g}")
    positive = model.strictly_positive
    if require_positive and not positive:
        raise ValidationError("model is not strictly positive")
    return ValidationReport(True, True, positive, max_err)


def sample_structured_model(
    template: StructureTemplate,
    alphabet: AlphabetSpec,
    d: int,
    seed: int | np.random.SeedSequence | None,
) -> TransitionModel:
    """Draw each allowed conditional row uniformly from the simplex.

    Rows are normalized i.i.d. unit exponentials.  Coordinates a target may
    not depend on are broadcast, so the kernel is exactly constant along them.
    """
    if template.max_lag > d:
        raise MaskError(f"template references lag {template.max_lag} > order {d}")
    rng = np.random.default_rng(seed)
    sizes = alphabet.sizes
    C = alphabet.joint_size**d
    kernels = []
    for target, m in zip(PROCESSES, sizes):
        mask = template.mask(target, d)
        draw_shape = tuple(sizes[p] if mask[lag, p] else 1 for lag in range(d) for p in range(3))
        draws = rng.exponential(1.0, size=draw_shape + (m,))
        draws /= draws.sum(axis=-1, keepdims=True)
        kernels.append(np.broadcast_to(draws, sizes * d + (m,)).reshape(C, m).copy())
    int_seed = seed if isinstance(seed, (int, np.integer)) else None
    return TransitionModel(alphabet, d, *kernels, template=template, seed=int_seed)


def lifted_transition_matrix(model: TransitionModel) -> np.ndarray:
    """Row-stochastic ``(C, C)`` matrix of the chain on joint d-tuples."""
    J = model.alphabet.joint_size
    C = model.n_contexts
    d = model.order
    P = model.joint_kernel()
    c = np.arange(C)
    cols = np.arange(J)[None, :] * J ** (d - 1) + (c // J)[:, None]
    A = np.zeros((C, C))
    A[np.repeat(c, J), cols.ravel()] = P.ravel()
    return A


def check_irreducible_aperiodic(A: np.ndarray) -> tuple[bool, bool]:
    """(irreducible, aperiodic) for the support graph of ``A``."""
    G = (A > 0).astype(np.int8)
    n_comp, _ = connected_components(G, directed=True, connection="strong")
    if n_comp != 1:
        return False, False
    order, _ = breadth_first_order(G, 0, directed=True, return_predecessors=True)
    level = np.full(A.shape[0], -1)
    level[0] = 0
    for u in order:
        for v in np.flatnonzero(G[u]):
            if level[v] < 0:
                level[v] = level[u] + 1
    rows, cols = np.nonzero(G)
    period = int(np.gcd.reduce(np.abs(level[rows] + 1 - level[cols])))
    return True, period == 1


def _power_iteration(A: np.ndarray, max_iter: int = 10**6, tol: float = 1e-14) -> np.ndarray:
    pi = np.full(A.shape[0], 1.0 / A.shape[0])
    for _ in range(max_iter):
        nxt = pi @ A
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt / nxt.sum()
        pi = nxt
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


def stationary_from_matrix(A: np.ndarray) -> tuple[np.ndarray, str]:
    """Solve ``pi = pi A`` with the normalization row appended."""
    n = A.shape[0]
    M = np.vstack([A.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, _, rank, _ = np.linalg.lstsq(M, b, rcond=None)
    method = "linear"
    if rank < n or not np.all(np.isfinite(pi)):
        pi, method = _power_iteration(A), "power"
    pi = np.where(pi < 0, 0.0, pi)
    pi /= pi.sum()
    if np.max(np.abs(pi @ A - pi)) > 1e-10 and method == "linear":
        pi, method = _power_iteration(A), "power"
    return pi, method


def stationary_distribution(
    model: TransitionModel, assume_ergodic: bool = False
) -> StationaryDistribution:
    """Unique invariant law of the lifted chain.

    Strictly positive kernels guarantee an irreducible aperiodic chain.
    Otherwise the support graph is checked (strong components and period)
    unless ``assume_ergodic`` is set.
    """
    validate_model(model)
    A = lifted_transition_matrix(model)
    if not model.strictly_positive and not assume_ergodic:
        irreducible, aperiodic = check_irreducible_aperiodic(A)
        if not (irreducible and aperiodic):
            raise ReducibleChainError(
                "lifted chain is " + ("periodic" if irreducible else "reducible")
            )
    pi, method = stationary_from_matrix(A)
    residual = float(np.max(np.abs(pi @ A - pi)))
    return StationaryDistribution(pi, A, model.alphabet, model.order, residual, method)


def window_variables(length: int, processes: Iterable[str] = PROCESSES) -> list[VariableSelector]:
    """All variables of a window, oldest step first, X, Y, Z within a step."""
    procs = list(processes)
    return [VariableSelector(p, lag) for lag in range(length - 1, -1, -1) for p in procs]


def window_distribution(
    model: TransitionModel,
    length: int,
    keep: Sequence[VariableSelector] | None = None,
    size_cap: int = DEFAULT_SIZE_CAP,
    stationary: StationaryDistribution | None = None,
) -> WindowDistribution:
    """Exact law of ``length`` consecutive stationary steps.

    The window starts from ``pi`` over the first ``d`` steps and chains the
    product kernel forward.  With ``keep`` given, every other variable is
    summed out as soon as it leaves the active d-step context, so only the
    requested marginal (plus the running context) is ever materialized.
    """
    d = model.order
    if length < d:
        raise SelectorError(f"window length {length} shorter than order {d}")
    if 3 * length > 52:
        raise SizeError(f"window length {length} exceeds the supported maximum of 17")
    sizes = model.alphabet.sizes
    if keep is None:
        keep = window_variables(length)
        if model.alphabet.joint_size**length > size_cap:
            raise SizeError(
                f"dense window count {model.alphabet.joint_size}^{length} exceeds cap {size_cap}"
            )
    keep = list(keep)
    for s in keep:
        if s.lag >= length:
            raise SelectorError(f"{s} outside window of length {length}")
    if len(set(keep)) != len(keep):
        raise SelectorError("duplicate selectors")

    def label(p, pos):
        return pos * 3 + p

    keep_labels = {label(_proc_index(s.process), length - 1 - s.lag) for s in keep}
    size_of = {label(p, pos): sizes[p] for pos in range(length) for p in range(3)}

    if stationary is None:
        stationary = stationary_distribution(model)
    cur = stationary.tensor()
    # pi axes run lag 1 .. lag d, i.e. positions d-1 .. 0
    cur_labels = [label(p, d - lag) for lag in range(1, d + 1) for p in range(3)]

    kernel_tensors = [model.kernel_tensor(p) for p in PROCESSES]
    for t in range(d, length):
        ctx_labels = [label(p, t - lag) for lag in range(1, d + 1) for p in range(3)]
        leaving = {label(p, t - d) for p in range(3)}
        out = [l for l in cur_labels if l not in leaving or l in keep_labels]
        out += [label(p, t) for p in range(3)]
        n_out = math.prod(size_of[l] for l in out)
        if n_out > size_cap:
            raise SizeError(f"intermediate window tensor of size {n_out} exceeds cap {size_cap}")
        operands = [cur, cur_labels]
        for p in range(3):
            operands += [kernel_tensors[p], ctx_labels + [label(p, t)]]
        cur = np.einsum(*operands, out, optimize="greedy")
        cur_labels = out

    order = [label(_proc_index(s.process), length - 1 - s.lag) for s in keep]
    cur = np.einsum(cur, cur_labels, order)
    return WindowDistribution.from_dense(length, keep, cur)


def sample_sequence(
    model: TransitionModel,
    n: int,
    seed: int | np.random.SeedSequence | None,
    stationary: StationaryDistribution | None = None,
) -> SampleSequence:
    """Simulate ``n`` steps; the first d-block is drawn exactly from ``pi``."""
    d = model.order
    if n < d:
        raise ValidationError(f"n = {n} shorter than the model order {d}")
    if stationary is None:
        stationary = stationary_distribution(model)
    rng = np.random.default_rng(seed)
    nx, ny, nz = model.alphabet.sizes
    J = model.alphabet.joint_size
    C = model.n_contexts

    cum_pi = np.cumsum(stationary.probs)
    c0 = min(int(np.searchsorted(cum_pi, rng.random() * cum_pi[-1], side="right")), C - 1)
    # context digits run lag 1 (most significant) .. lag d; emit oldest first
    initial = [(c0 // J**k) % J for k in range(d)]

    def cumulative(k):
        cum = np.cumsum(k, axis=1)
        cum[:, -1] = np.inf
        return cum.tolist()

    cx, cy, cz = (cumulative(k) for k in model.kernels)
    xs = np.empty(n, dtype=np.int64)
    ys = np.empty(n, dtype=np.int64)
    zs = np.empty(n, dtype=np.int64)
    for i, j in enumerate(initial):
        xs[i], rem = divmod(j, ny * nz)
        ys[i], zs[i] = divmod(rem, nz)

    top = J ** (d - 1)
    c = c0
    br = bisect.bisect_right
    u = rng.random((n - d, 3)).tolist()
    out_x, out_y, out_z = [], [], []
    for ux, uy, uz in u:
        x = br(cx[c], ux)
        y = br(cy[c], uy)
        z = br(cz[c], uz)
        out_x.append(x)
        out_y.append(y)
        out_z.append(z)
        c = ((x * ny + y) * nz + z) * top + c // J
    xs[d:], ys[d:], zs[d:] = out_x, out_y, out_z
    int_seed = seed if isinstance(seed, (int, np.integer)) else None
    return SampleSequence(xs, ys, zs, seed=int_seed, alphabet=model.alphabet)


# ---------------------------------------------------------------------------
# Hand-built models used in tests and documentation
# ---------------------------------------------------------------------------


def model_from_functions(alphabet: AlphabetSpec, d: int, fx, fy, fz=None, template=None) -> TransitionModel:
    """Build a model from callables ``f(context) -> distribution``.

    ``context`` is a ``(d, 3)`` integer array of (x, y, z), lag 1 first.
    """
    C = alphabet.joint_size**d
    ctx = decode_contexts(np.arange(C), alphabet, d)
    if fz is None:
        fz = lambda c: np.full(alphabet.z_size, 1.0 / alphabet.z_size)  # noqa: E731
    kernels = [np.array([np.asarray(f(ctx[c]), dtype=float) for c in range(C)]) for f in (fx, fy, fz)]
    return TransitionModel(alphabet, d, *kernels, template=template)


def copy_model(flip: float = 0.0, y_stay: float = 0.5) -> TransitionModel:
    """Binary pair with ``X_i = Y_{i-1}`` (XOR a Bernoulli(flip) bit).

    ``Y`` stays put with probability ``y_stay``; 0.5 makes it i.i.d. uniform.
    """
    a = AlphabetSpec(2, 2)

    def fx(ctx):
        y = ctx[0, 1]
        p = np.full(2, flip)
        p[y] = 1.0 - flip
        return p

    def fy(ctx):
        y = ctx[0, 1]
        p = np.full(2, 1.0 - y_stay)
        p[y] = y_stay
        return p

    x_parents = [("Y", 1)] if flip < 0.5 else []
    y_parents = [("Y", 1)] if y_stay != 0.5 else []
    return model_from_functions(a, 1, fx, fy, template=_preset("copy", x=x_parents, y=y_parents))


def independent_uniform_model(alphabet: AlphabetSpec = AlphabetSpec(2, 2), d: int = 1) -> TransitionModel:
    C = alphabet.joint_size**d
    kernels = [np.full((C, m), 1.0 / m) for m in alphabet.sizes]
    return TransitionModel(alphabet, d, *kernels, template=_preset("independent"))
