"""Slow reference computations used only by the tests.

Nothing here reuses the package's window, entropy or d-separation code.
"""

import itertools
import math
from collections import defaultdict

import numpy as np


def joint_symbols(alphabet):
    return list(itertools.product(range(alphabet.x_size), range(alphabet.y_size), range(alphabet.z_size)))


def transition_prob(model, past, nxt):
    """P(next joint symbol | past), past given oldest first as (x, y, z) tuples."""
    nx, ny, nz = model.alphabet.sizes
    J = nx * ny * nz
    c = 0
    for x, y, z in reversed(past):  # lag 1 is the most significant digit
        c = c * J + (x * ny + y) * nz + z
    x, y, z = nxt
    return model.kernel_x[c, x] * model.kernel_y[c, y] * model.kernel_z[c, z]


def power_stationary(model, steps=10_000):
    """Stationary law over d-blocks (oldest first) by plain power iteration."""
    syms = joint_symbols(model.alphabet)
    d = model.order
    states = list(itertools.product(syms, repeat=d))
    index = {s: i for i, s in enumerate(states)}
    A = np.zeros((len(states), len(states)))
    for s in states:
        for j in syms:
            A[index[s], index[s[1:] + (j,)]] += transition_prob(model, s, j)
    pi = np.full(len(states), 1.0 / len(states))
    for _ in range(steps):
        pi = pi @ A
    return {s: pi[index[s]] for s in states}


def brute_window(model, length, pi_blocks=None):
    """{window (tuple of (x, y, z), oldest first): probability} by enumeration."""
    d = model.order
    pi_blocks = pi_blocks or power_stationary(model)
    syms = joint_symbols(model.alphabet)
    out = {}
    for w in itertools.product(syms, repeat=length):
        p = pi_blocks[w[:d]]
        for t in range(d, length):
            if p == 0.0:
                break
            p *= transition_prob(model, w[t - d : t], w[t])
        if p > 0:
            out[w] = p
    return out


PROC = {"X": 0, "Y": 1, "Z": 2}


def pick(window, selectors):
    L = len(window)
    return tuple(window[L - 1 - lag][PROC[p]] for p, lag in selectors)


def H(dist, selectors):
    marg = defaultdict(float)
    for w, p in dist.items():
        marg[pick(w, selectors)] += p
    return -sum(p * math.log2(p) for p in marg.values() if p > 0)


def cond_entropy(dist, target, given):
    return H(dist, list(target) + list(given)) - H(dist, list(given))


def cmi(dist, a, b, c):
    return H(dist, a + c) + H(dist, b + c) - H(dist, a + b + c) - H(dist, c)


def binary_entropy(p):
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


# -- d-separation by active-trail enumeration -------------------------------


def _descendants(parents, node):
    children = defaultdict(set)
    for ch, ps in parents.items():
        for p in ps:
            children[p].add(ch)
    seen, stack = set(), [node]
    while stack:
        for c in children[stack.pop()]:
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return seen


def active_trail_separated(parents, a, b, c):
    """d-separation from the path definition: enumerate all simple skeleton paths.

    A path is active iff every collider on it is in C or has a descendant in
    C, and every non-collider is outside C.
    """
    c = set(c)
    nbrs = defaultdict(set)
    for ch, ps in parents.items():
        for p in ps:
            nbrs[ch].add(p)
            nbrs[p].add(ch)
    desc = {n: _descendants(parents, n) for n in parents}

    def is_parent(u, v):
        return u in parents.get(v, ())

    def active(path):
        for i in range(1, len(path) - 1):
            u, v, w = path[i - 1], path[i], path[i + 1]
            collider = is_parent(u, v) and is_parent(w, v)
            if collider:
                if v not in c and not (desc[v] & c):
                    return False
            elif v in c:
                return False
        return True

    def dfs(path, targets):
        if not active(path):  # a blocked prefix stays blocked
            return False
        last = path[-1]
        if last in targets and len(path) > 1:
            return True
        return any(dfs(path + [n], targets) for n in nbrs[last] if n not in path)

    for s in a:
        if dfs([s], set(b)):
            return False
    return True


# -- context tree weighting by definition ------------------------------------


def kt_block(symbols, m):
    """Sequential KT probability of a symbol list."""
    counts = [0] * m
    p = 1.0
    for s in symbols:
        p *= (counts[s] + 0.5) / (sum(counts) + m / 2)
        counts[s] += 1
    return p


def ctw_prob(pairs, m, radices, depth=0):
    """Weighted probability of (context tuple, symbol) pairs, recursively."""
    here = kt_block([s for _, s in pairs], m)
    if depth == len(radices):
        return here
    split = 1.0
    for c in range(radices[depth]):
        sub = [(ctx, s) for ctx, s in pairs if ctx[depth] == c]
        if sub:
            split *= ctw_prob(sub, m, radices, depth + 1)
    return 0.5 * here + 0.5 * split


def ctw_predict(pairs, context, m, radices):
    base = ctw_prob(pairs, m, radices)
    return [ctw_prob(pairs + [(tuple(context), a)], m, radices) / base for a in range(m)]
