"""Unrolled Bayesian networks of process triples and d-separation.

Each node is one process at one time step.  An edge ``S_{t-k} -> S'_t`` is
present iff the exact conditional mutual information between the two, given
the rest of the joint d-step past, exceeds ``epsilon``.  The edge template is
computed once and replicated at every time step.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import combinations
from typing import Hashable, Iterable, Mapping

from .errors import DisjointnessError, HorizonError, ValidationError
from .exact_info import exact_cmi
from .process_model import (
    PROCESSES,
    StructureTemplate,
    TransitionModel,
    VariableSelector,
    stationary_distribution,
    window_distribution,
)

DEFAULT_EPSILON = 1e-10


@dataclass(frozen=True, order=True)
class TimeNode:
    process: str
    time: int

    def __str__(self):
        return f"{self.process}_{self.time}"


@dataclass(frozen=True, eq=False)
class TimeNetwork:
    """DAG over (process, time) nodes for times ``1..horizon``.

    ``template`` holds (source, lag, target) triples; the unrolled edges are
    ``(source, t - lag) -> (target, t)`` for every ``t`` with ``t - lag >= 1``.
    Parents before time 1 are cut off, so the earliest steps lack the
    dependence they inherit from the unseen past.  Queries about a
    stationary window should use nodes a few steps after the start.
    """

    horizon: int
    order: int
    processes: tuple[str, ...]
    template: frozenset
    origin_model: TransitionModel | None = field(default=None, repr=False)
    edge_cmi: Mapping | None = field(default=None, repr=False)

    def __post_init__(self):
        parents: dict[TimeNode, set] = {n: set() for n in self.nodes}
        edges = set()
        for src, lag, tgt in self.template:
            if not 1 <= lag <= self.order:
                raise ValidationError(f"edge lag {lag} outside 1..{self.order}")
            for t in range(lag + 1, self.horizon + 1):
                a, b = TimeNode(src, t - lag), TimeNode(tgt, t)
                parents[b].add(a)
                edges.add((a, b))
        object.__setattr__(self, "_parents", {n: frozenset(p) for n, p in parents.items()})
        object.__setattr__(self, "edges", frozenset(edges))

    @property
    def nodes(self) -> list[TimeNode]:
        return [TimeNode(p, t) for t in range(1, self.horizon + 1) for p in self.processes]

    @property
    def parents(self) -> Mapping[TimeNode, frozenset]:
        return self._parents

    def has_edge(self, source: str, target: str, lag: int | None = None) -> bool:
        return any(s == source and g == target and (lag is None or k == lag) for s, k, g in self.template)

    def edges_into(self, t: int) -> set:
        """Edges whose head is at time ``t``, as (source, lag, target) triples."""
        return {(a.process, b.time - a.time, b.process) for a, b in self.edges if b.time == t}

    def with_horizon(self, horizon: int) -> "TimeNetwork":
        return replace(self, horizon=horizon)

    @classmethod
    def from_template(
        cls,
        template: StructureTemplate,
        d: int,
        horizon: int,
        processes: Iterable[str] = ("X", "Y"),
    ) -> "TimeNetwork":
        """Structural network straight from a parent template (no model)."""
        procs = tuple(processes)
        edges = frozenset(
            (s, k, t) for t in procs for s, k in template.parents[t] if s in procs
        )
        return cls(horizon, d, procs, edges)

    def to_dot(self) -> str:
        lines = ["digraph TimeNetwork {", "  rankdir=LR;"]
        for n in self.nodes:
            lines.append(f'  "{n}";')
        for a, b in sorted(self.edges):
            lines.append(f'  "{a}" -> "{b}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def active_processes(model: TransitionModel) -> tuple[str, ...]:
    return ("X", "Y", "Z") if model.alphabet.z_size > 1 else ("X", "Y")


def build_time_network(
    model: TransitionModel,
    horizon: int,
    epsilon: float = DEFAULT_EPSILON,
) -> TimeNetwork:
    """Network whose template edges are the strictly informative parents."""
    d = model.order
    procs = active_processes(model)
    w = window_distribution(model, d + 1, stationary=stationary_distribution(model))
    past = [VariableSelector(p, k) for k in range(1, d + 1) for p in procs]
    template, values = set(), {}
    for tgt in procs:
        for s in past:
            rest = [v for v in past if v != s]
            cmi = exact_cmi(w, [VariableSelector(tgt, 0)], [s], rest)
            values[(s.process, s.lag, tgt)] = cmi
            if cmi > epsilon:
                template.add((s.process, s.lag, tgt))
    return TimeNetwork(horizon, d, procs, frozenset(template), model, values)


# ---------------------------------------------------------------------------
# d-separation
# ---------------------------------------------------------------------------


def _parents_of(net) -> Mapping[Hashable, Iterable]:
    if isinstance(net, TimeNetwork):
        return net.parents
    return net


def _as_set(nodes) -> frozenset:
    if isinstance(nodes, (TimeNode, str)):
        return frozenset([nodes])
    return frozenset(nodes)


def moral_ancestral_graph(net, nodes: Iterable) -> dict:
    """Steps 1, 2 and 4: ancestral subgraph, moralized, undirected."""
    parents = _parents_of(net)
    ancestors, queue = set(nodes), deque(nodes)
    while queue:
        for p in parents.get(queue.popleft(), ()):
            if p not in ancestors:
                ancestors.add(p)
                queue.append(p)
    adj = {n: set() for n in ancestors}
    for child in ancestors:
        ps = list(parents.get(child, ()))
        for p in ps:
            adj[child].add(p)
            adj[p].add(child)
        for a, b in combinations(ps, 2):
            adj[a].add(b)
            adj[b].add(a)
    return adj


def connecting_path(net, a, b, c=()) -> list | None:
    """An undirected path from A to B left after Algorithm 1 removes C, or None."""
    A, B, C = _as_set(a), _as_set(b), _as_set(c)
    if A & B or A & C or B & C:
        raise DisjointnessError("A, B and C must be disjoint")
    parents = _parents_of(net)
    for n in A | B | C:
        if n not in parents:
            raise ValidationError(f"node {n} not in network")
    adj = moral_ancestral_graph(net, A | B | C)
    prev = {n: None for n in A}
    queue = deque(sorted(A, key=str))
    while queue:
        u = queue.popleft()
        if u in B:
            path = [u]
            while prev[path[-1]] is not None:
                path.append(prev[path[-1]])
            return path[::-1]
        for v in sorted(adj[u], key=str):
            if v not in prev and v not in C:
                prev[v] = u
                queue.append(v)
    return None


def d_separated(net, a, b, c=()) -> bool:
    """True iff C d-separates A from B (ancestral moralization criterion)."""
    return connecting_path(net, a, b, c) is None


# ---------------------------------------------------------------------------
# Conditional Markovicity
# ---------------------------------------------------------------------------


class Verdict(str, Enum):
    NO_INFLUENCE = "NoInfluence"
    D_SEPARATED = "DSeparatedAtOrder"
    NOT_D_SEPARATED = "NotDSeparated"


@dataclass(frozen=True)
class MarkovCertificate:
    verdict: Verdict
    l: int
    horizon: int
    tested_l_values: tuple[int, ...] = ()
    witness_path: tuple[str, ...] | None = None
    separating_set_size: int | None = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "l": self.l,
            "horizon": self.horizon,
            "tested_l_values": list(self.tested_l_values),
            "witness_path": None if self.witness_path is None else list(self.witness_path),
            "separating_set_size": self.separating_set_size,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def min_horizon(d: int) -> int:
    return 4 * d + 4


def default_horizon(d: int, l: int = 0) -> int:
    return max(4 * d + 4, 4 * (d + l) + 4)


def _check_horizon(net: TimeNetwork, horizon: int | None) -> TimeNetwork:
    if horizon is not None and horizon != net.horizon:
        net = net.with_horizon(horizon)
    if net.horizon < min_horizon(net.order):
        raise HorizonError(f"horizon {net.horizon} < 4d + 4 = {min_horizon(net.order)}")
    return net


def theorem1_condition(net: TimeNetwork, horizon: int | None = None) -> bool:
    """Whether {X^T, Z^T} d-separates every pair Y_j, Y_k (j < k <= T).

    Pairs are limited to ``k - j <= T - 2d``; by time invariance a failure
    anywhere recurs inside that window.
    """
    net = _check_horizon(net, horizon)
    T, d = net.horizon, net.order
    cond = {TimeNode(p, t) for p in ("X", "Z") if p in net.processes for t in range(1, T + 1)}
    for k in range(2, T + 1):
        for j in range(max(1, k - (T - 2 * d)), k):
            if not d_separated(net, TimeNode("Y", j), TimeNode("Y", k), cond):
                return False
    return True


def markov_certificate(net: TimeNetwork, l: int, horizon: int | None = None) -> MarkovCertificate:
    """Test whether the last ``l`` steps of (X, Z) screen X_T off the rest of the past."""
    if horizon is None and net.horizon < default_horizon(net.order, l):
        horizon = default_horizon(net.order, l)
    net = _check_horizon(net, horizon)
    T = net.horizon
    if not 1 <= l <= T - 2:
        raise HorizonError(f"l = {l} outside 1..{T - 2}")
    if not net.has_edge("Y", "X"):
        return MarkovCertificate(Verdict.NO_INFLUENCE, l, T, (l,))
    side = [p for p in ("X", "Z") if p in net.processes]
    recent = {TimeNode(p, t) for p in side for t in range(T - l, T)}
    earlier = {TimeNode(p, t) for p in side for t in range(1, T - l)}
    path = connecting_path(net, {TimeNode("X", T)}, earlier, recent)
    if path is None:
        return MarkovCertificate(Verdict.D_SEPARATED, l, T, (l,), separating_set_size=len(recent))
    return MarkovCertificate(Verdict.NOT_D_SEPARATED, l, T, (l,), witness_path=tuple(map(str, path)))
