"""Exact entropies, conditional mutual informations and TDI/PDI rates.

Everything here is computed by enumeration over stationary window laws of a
known :class:`~dibias.process_model.TransitionModel`, in bits.  These values
are the ground truth the estimators are checked against.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import xlogy

from .errors import SelectorError, ValidationError
from .process_model import (
    DEFAULT_SIZE_CAP,
    PROCESSES,
    StationaryDistribution,
    TransitionModel,
    VariableSelector,
    WindowDistribution,
    sel,
    stationary_distribution,
    window_distribution,
)

CONVERGENCE_GAP = 2e-3
SANDWICH_SLACK = 1e-9

__all__ = [
    "VariableSelector",
    "InfoRates",
    "entropy_of",
    "exact_conditional_entropy",
    "exact_joint_entropy",
    "exact_cmi",
    "exact_tdi_rate",
    "exact_pdi_rate",
    "tdi_selectors",
    "pdi_selectors",
    "context_order",
    "sandwich",
    "rates_csv",
]


def entropy_of(p: np.ndarray) -> float:
    """Shannon entropy in bits of a probability array."""
    p = np.asarray(p, dtype=float).ravel()
    return float(-xlogy(p, p).sum() / np.log(2))


def _as_list(selectors) -> list[VariableSelector]:
    if selectors is None:
        return []
    if isinstance(selectors, VariableSelector):
        return [selectors]
    return list(selectors)


def exact_joint_entropy(w: WindowDistribution, selectors: Iterable[VariableSelector]) -> float:
    selectors = _as_list(selectors)
    if not selectors:
        return 0.0
    return entropy_of(w.marginal(selectors))


def exact_conditional_entropy(
    w: WindowDistribution,
    target: VariableSelector | Sequence[VariableSelector],
    given: Iterable[VariableSelector] = (),
) -> float:
    """H(target | given) = H(target, given) - H(given)."""
    target, given = _as_list(target), _as_list(given)
    if set(target) & set(given):
        raise SelectorError("target and conditioning sets overlap")
    h = exact_joint_entropy(w, target + given) - exact_joint_entropy(w, given)
    return max(h, 0.0) if h > -1e-12 else h


def exact_cmi(w: WindowDistribution, a, b, c=()) -> float:
    """I(A; B | C) in bits, clipped at zero for round-off."""
    a, b, c = _as_list(a), _as_list(b), _as_list(c)
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise SelectorError("selector sets must be disjoint")
    joint = w.marginal(a + b + c)
    na, nb = len(a), len(b)
    h_abc = entropy_of(joint)
    h_ac = entropy_of(joint.sum(axis=tuple(range(na, na + nb))))
    h_bc = entropy_of(joint.sum(axis=tuple(range(na))))
    h_c = entropy_of(joint.sum(axis=tuple(range(na + nb)))) if c else 0.0
    value = h_ac + h_bc - h_abc - h_c
    return max(value, 0.0) if value > -1e-12 else value


def context_order(selector: VariableSelector) -> tuple[int, int]:
    """Sort key: nearest lag first, then X, Y, Z."""
    return (selector.lag, PROCESSES.index(selector.process))


def _context(has_z: bool, process: str, lags: Iterable[int]) -> list[VariableSelector]:
    if process == "Z" and not has_z:
        return []
    return sel(process, *lags)


def tdi_selectors(k: int, has_z: bool = False):
    """(target, restricted context, full context) for TDI of order ``k``.

    Restricted: X lags 1..k and Z lags 0..k.  Full adds Y lags 0..k.  A
    singleton side process (``has_z=False``) contributes nothing.
    """
    restricted = _context(has_z, "X", range(1, k + 1)) + _context(has_z, "Z", range(0, k + 1))
    full = restricted + _context(has_z, "Y", range(0, k + 1))
    return (
        VariableSelector("X", 0),
        sorted(restricted, key=context_order),
        sorted(full, key=context_order),
    )


def pdi_selectors(k: int, d: int, has_z: bool = False):
    """(target, restricted context, full context) for PDI of order ``k``.

    Uses the joint d-Markov reduction: the restricted context is X lags
    1..k+d, Y lags k+1..k+d and Z lags 0..k+d; the full context is X lags
    1..d, Y lags 0..d and Z lags 0..d.
    """
    restricted = (
        _context(has_z, "X", range(1, k + d + 1))
        + _context(has_z, "Y", range(k + 1, k + d + 1))
        + _context(has_z, "Z", range(0, k + d + 1))
    )
    full = (
        _context(has_z, "X", range(1, d + 1))
        + _context(has_z, "Y", range(0, d + 1))
        + _context(has_z, "Z", range(0, d + 1))
    )
    return (
        VariableSelector("X", 0),
        sorted(restricted, key=context_order),
        sorted(full, key=context_order),
    )


def _has_z(model: TransitionModel) -> bool:
    return model.alphabet.z_size > 1


def _window_length(selectors) -> int:
    return max(s.lag for s in selectors) + 1


def _cond_entropy_on_model(model, target, given, stationary, size_cap) -> float:
    sels = [target] + list(given)
    L = max(_window_length(sels), model.order)
    w = window_distribution(model, L, keep=sels, size_cap=size_cap, stationary=stationary)
    return exact_conditional_entropy(w, target, given)


def exact_tdi_rate(
    model: TransitionModel,
    k: int,
    stationary: StationaryDistribution | None = None,
    size_cap: int = DEFAULT_SIZE_CAP,
    definitional: bool = False,
) -> float:
    """Stationary per-step TDI of order ``k`` from Y to X given Z.

    I(X_t; Y_{t-k}^t | X_{t-k}^{t-1}, Z_{t-k}^t), evaluated on a window of
    length k+1.  For ``k >= d`` the fully conditioned entropy equals its
    d-step version by joint d-Markovity, which keeps the window small;
    ``definitional=True`` forces the full length-(k+1) computation.  Orders
    below the model order are allowed but warned about.
    """
    if k < 1:
        raise ValidationError(f"TDI order must be >= 1, got {k}")
    if k < model.order:
        warnings.warn(f"TDI order {k} below model order {model.order}; it no longer bounds the DI rate")
    stationary = stationary or stationary_distribution(model)
    target, restricted, full = tdi_selectors(k, _has_z(model))
    if k < model.order or definitional:
        w = window_distribution(
            model, k + 1, keep=[target] + full, size_cap=size_cap, stationary=stationary
        )
        y_part = [s for s in full if s.process == "Y"]
        return exact_cmi(w, [target], y_part, restricted)
    # k >= d: the fully conditioned term only sees the last d steps
    h_restricted = _cond_entropy_on_model(model, target, restricted, stationary, size_cap)
    h_full = _cond_entropy_on_model(model, target, tdi_selectors(model.order, _has_z(model))[2], stationary, size_cap)
    value = h_restricted - h_full
    return max(value, 0.0) if value > -1e-12 else value


def exact_pdi_rate(
    model: TransitionModel,
    k: int,
    stationary: StationaryDistribution | None = None,
    size_cap: int = DEFAULT_SIZE_CAP,
) -> float:
    """Stationary per-step PDI of order ``k`` via the joint d-Markov identity.

    H(X_t | X_{t-k-d}^{t-1}, Y_{t-k-d}^{t-k-1}, Z_{t-k-d}^t)
        - H(X_t | X_{t-d}^{t-1}, Y_{t-d}^t, Z_{t-d}^t),
    both terms taken from the window of length k+d+1.
    """
    if k < 1:
        raise ValidationError(f"PDI order must be >= 1, got {k}")
    stationary = stationary or stationary_distribution(model)
    target, restricted, full = pdi_selectors(k, model.order, _has_z(model))
    L = k + model.order + 1
    h_restricted = exact_conditional_entropy(
        window_distribution(model, L, keep=[target] + restricted, size_cap=size_cap, stationary=stationary),
        target,
        restricted,
    )
    h_full = exact_conditional_entropy(
        window_distribution(model, L, keep=[target] + full, size_cap=size_cap, stationary=stationary),
        target,
        full,
    )
    value = h_restricted - h_full
    return max(value, 0.0) if value > -1e-12 else value


@dataclass(frozen=True)
class InfoRates:
    """PDI/TDI bracket on the DI rate (bits per step)."""

    k: int
    tdi_rate: float
    pdi_rate: float
    k_pdi: int | None = None
    di_proxy: float | None = None

    @property
    def gap(self) -> float:
        return self.tdi_rate - self.pdi_rate

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.tdi_rate + self.pdi_rate)

    @property
    def converged(self) -> bool:
        return self.di_proxy is not None


def sandwich(
    model: TransitionModel,
    k1: int,
    k2: int,
    stationary: StationaryDistribution | None = None,
    tol: float = CONVERGENCE_GAP,
    size_cap: int = DEFAULT_SIZE_CAP,
) -> InfoRates:
    """PDI of order ``k1`` and TDI of order ``k2`` bracketing the DI rate.

    ``di_proxy`` is the midpoint when the bracket is narrower than ``tol``.
    """
    if k1 < 1:
        raise ValidationError(f"k1 must be >= 1, got {k1}")
    if k2 < model.order:
        raise ValidationError(f"k2 must be >= model order {model.order}, got {k2}")
    stationary = stationary or stationary_distribution(model)
    tdi = exact_tdi_rate(model, k2, stationary, size_cap)
    pdi = exact_pdi_rate(model, k1, stationary, size_cap)
    if pdi > tdi + SANDWICH_SLACK:
        raise AssertionError(f"PDI {pdi!r} exceeds TDI {tdi!r}; bracket violated")
    proxy = 0.5 * (tdi + pdi) if tdi - pdi <= tol else None
    return InfoRates(k=k2, tdi_rate=tdi, pdi_rate=pdi, k_pdi=k1, di_proxy=proxy)


RATES_HEADER = ["model_id", "structure", "seed", "k", "tdi_bits", "pdi_bits", "di_proxy_bits"]


def rates_csv(rows: Iterable[dict], out=None) -> str:
    """Write rate rows (dicts keyed by ``RATES_HEADER``) as CSV."""
    buf = io.StringIO() if out is None else out
    writer = csv.DictWriter(buf, fieldnames=RATES_HEADER, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in RATES_HEADER})
    return buf.getvalue() if out is None else ""
