"""TDI and PDI estimates from a single sampled realization.

Both rates are estimated as the average, over time, of the KL divergence
between a *full* and a *restricted* predictive model of X_t.  The predictive
models are either add-half smoothed plug-in tables or context tree weighting
(CTW) mixtures with Krichevsky-Trofimov leaves.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import DepthMismatchError, EmptySequenceError, SelectorError, ValidationError
from .exact_info import pdi_selectors, tdi_selectors
from .process_model import SampleSequence, VariableSelector

KINDS = ("plugin", "ctw")
_LOG_HALF = math.log(0.5)


@dataclass(frozen=True)
class ContextSpec:
    """Target symbol (lag 0) and the ordered selectors it is predicted from."""

    target: VariableSelector
    context: tuple[VariableSelector, ...]

    def __post_init__(self):
        object.__setattr__(self, "context", tuple(self.context))
        if self.target.lag != 0:
            raise SelectorError("target must be at lag 0")
        if len(set(self.context)) != len(self.context):
            raise SelectorError("context selectors must be distinct")
        if self.target in self.context:
            raise SelectorError("target may not appear in its own context")

    @property
    def max_lag(self) -> int:
        return max((s.lag for s in self.context), default=0)

    @property
    def depth(self) -> int:
        return len(self.context)


def extract(seq: SampleSequence, spec: ContextSpec, start: int | None = None):
    """(targets, context symbols) for every time index ``i >= start``.

    Context symbols come back as an ``(N, D)`` integer array in spec order.
    """
    start = spec.max_lag if start is None else start
    if start < spec.max_lag:
        raise SelectorError(f"start {start} precedes the deepest lag {spec.max_lag}")
    if seq.n <= start:
        raise EmptySequenceError(f"sequence of length {seq.n} has no samples past index {start}")
    idx = np.arange(start, seq.n)
    targets = seq.series(spec.target.process)[idx]
    ctx = np.empty((idx.size, spec.depth), dtype=np.int64)
    for j, s in enumerate(spec.context):
        ctx[:, j] = seq.series(s.process)[idx - s.lag]
    return targets, ctx


def _prefix_codes(ctx: np.ndarray, radices: Sequence[int]) -> list[np.ndarray]:
    """Mixed-radix codes of every context prefix, depth 0 .. D."""
    codes = [np.zeros(ctx.shape[0], dtype=np.int64)]
    for j, r in enumerate(radices):
        codes.append(codes[-1] * r + ctx[:, j])
    return codes


def _lookup(table: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Row of each code in sorted ``table``, or -1 when absent."""
    pos = np.searchsorted(table, codes)
    pos = np.minimum(pos, max(table.size - 1, 0))
    hit = table.size > 0
    found = (table[pos] == codes) if hit else np.zeros(codes.shape, dtype=bool)
    return np.where(found, pos, -1)


def _kt_log_prob(counts: np.ndarray) -> np.ndarray:
    """Log KT block probability (natural log) of each row of counts."""
    m = counts.shape[-1]
    total = counts.sum(axis=-1)
    return (
        gammaln(counts + 0.5).sum(axis=-1)
        - m * gammaln(0.5)
        - gammaln(total + m / 2)
        + gammaln(m / 2)
    )


def _add_half(counts: np.ndarray) -> np.ndarray:
    m = counts.shape[-1]
    return (counts + 0.5) / (counts.sum(axis=-1, keepdims=True) + m / 2)


@dataclass(eq=False)
class PredictiveModel:
    """Fitted conditional model of the target given its context.

    ``levels[t]`` holds the sorted prefix codes and symbol counts of all
    depth-``t`` contexts seen in training.  Plug-in models only keep the
    deepest level; CTW keeps them all plus the KT and weighted log
    probabilities of every node.
    """

    spec: ContextSpec
    kind: str
    alphabet_size: int
    radices: tuple[int, ...]
    levels: list = field(repr=False)
    n_samples: int = 0
    depth: int | None = None

    def predict(self, contexts) -> np.ndarray:
        """Predictive distributions, one row per context (``(N, D)`` symbols)."""
        ctx = np.atleast_2d(np.asarray(contexts, dtype=np.int64))
        if ctx.shape[1] != self.spec.depth:
            raise SelectorError(f"expected {self.spec.depth} context symbols, got {ctx.shape[1]}")
        codes = _prefix_codes(ctx, self.radices)
        if self.kind == "plugin":
            return self._predict_plugin(codes[-1])
        return self._predict_ctw(codes)

    def predict_one(self, context: Sequence[int]) -> np.ndarray:
        return self.predict(np.asarray(context, dtype=np.int64).reshape(1, -1))[0]

    def _predict_plugin(self, codes: np.ndarray) -> np.ndarray:
        table, counts = self.levels[-1]["codes"], self.levels[-1]["counts"]
        rows = _lookup(table, codes)
        out = np.full((codes.size, self.alphabet_size), 1.0 / self.alphabet_size)
        seen = rows >= 0
        out[seen] = _add_half(counts[rows[seen]])
        return out

    def _predict_ctw(self, codes: list[np.ndarray]) -> np.ndarray:
        m = self.alphabet_size
        D = len(self.levels) - 1
        ratio = None
        for t in range(D, -1, -1):
            lvl = self.levels[t]
            rows = _lookup(lvl["codes"], codes[t])
            seen = rows >= 0
            kt_ratio = np.full((rows.size, m), 1.0 / m)
            kt_ratio[seen] = _add_half(lvl["counts"][rows[seen]])
            if ratio is None:
                ratio = kt_ratio
                continue
            # unseen nodes have KT and children products both equal to 1
            log_kt = np.zeros(rows.size)
            log_ch = np.zeros(rows.size)
            log_kt[seen] = lvl["log_kt"][rows[seen]]
            log_ch[seen] = lvl["log_children"][rows[seen]]
            w = 1.0 / (1.0 + np.exp(np.clip(log_ch - log_kt, -700, 700)))
            ratio = w[:, None] * kt_ratio + (1.0 - w[:, None]) * ratio
        return ratio

    @property
    def log_prob(self) -> float:
        """Log2 probability the model assigns to its training targets."""
        if self.kind == "ctw":
            return float(self.levels[0]["log_w"][0] / math.log(2)) if self.n_samples else 0.0
        return float(_kt_log_prob(self.levels[-1]["counts"]).sum() / math.log(2))


def _alphabet_sizes(seq: SampleSequence, spec: ContextSpec) -> tuple[int, tuple[int, ...]]:
    m = seq.alphabet_size(spec.target.process)
    radices = tuple(seq.alphabet_size(s.process) for s in spec.context)
    return m, radices


def _level_counts(code: np.ndarray, targets: np.ndarray, m: int):
    uniq, inv = np.unique(code, return_inverse=True)
    counts = np.bincount(inv * m + targets, minlength=uniq.size * m).reshape(uniq.size, m)
    return uniq, inv, counts.astype(float)


def fit_plugin(seq: SampleSequence, spec: ContextSpec, start: int | None = None) -> PredictiveModel:
    """Count (context, target) pairs; predict with add-half smoothing."""
    targets, ctx = extract(seq, spec, start)
    m, radices = _alphabet_sizes(seq, spec)
    code = _prefix_codes(ctx, radices)[-1]
    uniq, _, counts = _level_counts(code, targets, m)
    levels = [{"codes": uniq, "counts": counts}]
    return PredictiveModel(spec, "plugin", m, radices, levels, targets.size)


def fit_ctw(
    seq: SampleSequence, spec: ContextSpec, depth: int | None = None, start: int | None = None
) -> PredictiveModel:
    """Context tree weighting model, one tree level per context selector.

    Uses the closed form of the sequential KT product, which depends only on
    final counts, so every node is computed in one vectorized pass.  The
    result matches :class:`SequentialCtw` fed the same symbols.
    """
    depth = spec.depth if depth is None else depth
    if depth != spec.depth:
        raise DepthMismatchError(f"depth {depth} != number of context selectors {spec.depth}")
    targets, ctx = extract(seq, spec, start)
    m, radices = _alphabet_sizes(seq, spec)
    codes = _prefix_codes(ctx, radices)
    levels = []
    inverses = []
    for t in range(depth + 1):
        uniq, inv, counts = _level_counts(codes[t], targets, m)
        levels.append({"codes": uniq, "counts": counts, "log_kt": _kt_log_prob(counts)})
        inverses.append(inv)
    levels[-1]["log_w"] = levels[-1]["log_kt"]
    levels[-1]["log_children"] = np.zeros(levels[-1]["codes"].size)
    for t in range(depth - 1, -1, -1):
        child = levels[t + 1]
        # parent row of each child node, via any sample that reaches it
        first = np.zeros(child["codes"].size, dtype=np.int64)
        first[inverses[t + 1]] = np.arange(targets.size)
        parent = inverses[t][first]
        log_children = np.bincount(parent, weights=child["log_w"], minlength=levels[t]["codes"].size)
        levels[t]["log_children"] = log_children
        levels[t]["log_w"] = np.logaddexp(_LOG_HALF + levels[t]["log_kt"], _LOG_HALF + log_children)
    return PredictiveModel(spec, "ctw", m, radices, levels, targets.size, depth)


class CtwNode:
    """One node of a sequentially updated context tree."""

    __slots__ = ("counts", "kt_log_prob", "weighted_log_prob", "children")

    def __init__(self, m: int):
        self.counts = [0] * m
        self.kt_log_prob = 0.0
        self.weighted_log_prob = 0.0
        self.children: dict[int, CtwNode] = {}

    def children_log_prob(self) -> float:
        return sum(c.weighted_log_prob for c in self.children.values())


class SequentialCtw:
    """Symbol-by-symbol CTW; slow, used to check :func:`fit_ctw`."""

    def __init__(self, alphabet_size: int, depth: int):
        self.m = alphabet_size
        self.depth = depth
        self.root = CtwNode(alphabet_size)

    def _path(self, context: Sequence[int], create: bool) -> list[CtwNode | None]:
        path = [self.root]
        node = self.root
        for sym in context[: self.depth]:
            nxt = node.children.get(sym) if node is not None else None
            if nxt is None and create:
                nxt = node.children[sym] = CtwNode(self.m)
            path.append(nxt)
            node = nxt
        return path

    def update(self, context: Sequence[int], symbol: int) -> None:
        path = self._path(context, create=True)
        for node in path:
            total = sum(node.counts)
            node.kt_log_prob += math.log((node.counts[symbol] + 0.5) / (total + self.m / 2))
            node.counts[symbol] += 1
        for t in range(len(path) - 1, -1, -1):
            node = path[t]
            if t == self.depth:
                node.weighted_log_prob = node.kt_log_prob
            else:
                node.weighted_log_prob = float(
                    np.logaddexp(_LOG_HALF + node.kt_log_prob, _LOG_HALF + node.children_log_prob())
                )

    def predict(self, context: Sequence[int]) -> np.ndarray:
        path = self._path(context, create=False)
        ratio = None
        for t in range(len(path) - 1, -1, -1):
            node = path[t]
            if node is None:
                kt = np.full(self.m, 1.0 / self.m)
                log_kt = log_ch = 0.0
            else:
                kt = (np.array(node.counts) + 0.5) / (sum(node.counts) + self.m / 2)
                log_kt, log_ch = node.kt_log_prob, node.children_log_prob()
            if ratio is None:
                ratio = kt
                continue
            w = 1.0 / (1.0 + math.exp(max(min(log_ch - log_kt, 700), -700)))
            ratio = w * kt + (1 - w) * ratio
        return ratio

    @property
    def log_prob(self) -> float:
        return self.root.weighted_log_prob / math.log(2)


def fit_model(seq, spec, kind: str, start: int | None = None) -> PredictiveModel:
    if kind == "plugin":
        return fit_plugin(seq, spec, start)
    if kind == "ctw":
        return fit_ctw(seq, spec, start=start)
    raise ValidationError(f"unknown estimator kind {kind!r}; expected one of {KINDS}")


def divergence_rate(
    seq: SampleSequence,
    full: ContextSpec,
    restricted: ContextSpec,
    kind: str = "ctw",
) -> float:
    """Time-averaged KL(Q_full(. | ctx_i) || Q_restricted(. | ctx_i)) in bits."""
    if kind not in KINDS:
        raise ValidationError(f"unknown estimator kind {kind!r}; expected one of {KINDS}")
    start = max(full.max_lag, restricted.max_lag)
    if seq.n <= start:
        raise EmptySequenceError(f"sequence of length {seq.n} too short for lag {start}")
    n_ctx = math.prod(seq.alphabet_size(s.process) for s in full.context)
    if seq.n - start < 100 * n_ctx:
        warnings.warn(
            f"{seq.n - start} samples for {n_ctx} full contexts; estimates may be biased",
            stacklevel=3,
        )
    q = []
    for spec in (full, restricted):
        model = fit_model(seq, spec, kind, start)
        _, ctx = extract(seq, spec, start)
        code = _prefix_codes(ctx, model.radices)[-1]
        uniq, first, inv = np.unique(code, return_index=True, return_inverse=True)
        q.append(model.predict(ctx[first])[inv])
    qf, qr = q
    kl = np.sum(qf * (np.log2(qf) - np.log2(qr)), axis=1)
    value = float(kl.mean())
    return max(value, 0.0)


def _has_z(seq: SampleSequence) -> bool:
    return seq.alphabet_size("Z") > 1


def estimate_tdi(seq: SampleSequence, k: int, kind: str = "ctw") -> float:
    """Estimated TDI rate of order ``k`` (bits per step)."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    target, restricted, full = tdi_selectors(k, _has_z(seq))
    return divergence_rate(seq, ContextSpec(target, full), ContextSpec(target, restricted), kind)


def estimate_pdi(seq: SampleSequence, k: int, d: int, kind: str = "ctw") -> float:
    """Estimated PDI rate of order ``k`` for a jointly ``d``-Markov source."""
    if k < 1 or d < 1:
        raise ValidationError(f"k and d must be >= 1, got k={k}, d={d}")
    target, restricted, full = pdi_selectors(k, d, _has_z(seq))
    return divergence_rate(seq, ContextSpec(target, full), ContextSpec(target, restricted), kind)


ESTIMATES_HEADER = ["model_id", "structure", "seed", "n", "k", "kind", "tdi_hat_bits", "pdi_hat_bits"]


def estimates_csv(rows: Iterable[dict], out=None) -> str:
    buf = io.StringIO() if out is None else out
    writer = csv.DictWriter(buf, fieldnames=ESTIMATES_HEADER, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in ESTIMATES_HEADER})
    return buf.getvalue() if out is None else ""
