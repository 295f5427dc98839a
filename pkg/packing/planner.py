"""
Packing sequence planners: exact ordering search, greedy, insertion local
search and the seeded random baseline.

Candidates are compared by (zero-probability pair count, log-likelihood of the
remaining pairs): fewer zero pairs always wins, so -inf orderings still rank
among themselves.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .catalog import class_label
from .conf import PlannerLimits
from .exceptions import CapacityError, ConfigurationError, LabelError
from .scoring import PackingSequence, resolve_indices

logger = logging.getLogger(__name__)

# Log-likelihood differences below this are ties.
TIE_TOLERANCE = 1e-9


class Method(str, Enum):
    EXACT = "exact"
    GREEDY = "greedy"
    LOCAL_SEARCH = "local_search"
    RANDOM = "random"
    LLM = "llm"


@dataclass(frozen=True)
class PlanRequest:
    items: tuple
    method: Method = Method.LOCAL_SEARCH
    seed: int = None
    limits: PlannerLimits = field(default_factory=PlannerLimits)

    def __post_init__(self):
        items = tuple(class_label(i) for i in self.items)
        if not items:
            raise LabelError("A plan request needs at least one item")
        if len(set(items)) != len(items):
            raise LabelError(f"Plan request items must be distinct: {list(items)}")
        object.__setattr__(self, "items", items)
        try:
            object.__setattr__(self, "method", Method(self.method))
        except ValueError as exc:
            raise ConfigurationError(f"Unknown planning method: {self.method!r}") from exc


class _Weights:
    """
    Pair weights over the requested items, kept in catalog-index order.

    Items keep the caller's labels; two items resolving to one class are
    rejected.
    """

    def __init__(self, items, m):
        labels = [class_label(i) for i in items]
        by_class = {}
        for label, index in zip(labels, resolve_indices(labels, m)):
            if index in by_class:
                raise LabelError(
                    f"Items {by_class[index]!r} and {label!r} both resolve to class {m.classes[index]!r}",
                    label=label,
                )
            by_class[index] = label
        self.indices = sorted(by_class)
        self.names = [by_class[i] for i in self.indices]
        n = len(self.indices)
        sub = m.prob[np.ix_(self.indices, self.indices)]
        self.prob = sub.tolist()
        self.zeros = [[1 if i != k and sub[i, k] == 0.0 else 0 for k in range(n)] for i in range(n)]
        self.logs = [
            [math.log(sub[i, k]) if i != k and sub[i, k] > 0.0 else 0.0 for k in range(n)]
            for i in range(n)
        ]

    def __len__(self):
        return len(self.indices)

    def key(self, order):
        zeros = 0
        logs = []
        for p in range(len(order)):
            for q in range(p + 1, len(order)):
                a, b = order[p], order[q]
                zeros += self.zeros[a][b]
                logs.append(self.logs[a][b])
        return zeros, math.fsum(logs)

    def sequence(self, order):
        return PackingSequence(tuple(self.names[i] for i in order))


def _better(candidate, incumbent):
    """Strictly better (zeros, loglik) key."""
    if candidate[0] != incumbent[0]:
        return candidate[0] < incumbent[0]
    return candidate[1] > incumbent[1] + TIE_TOLERANCE


def plan_exact(items, m, limits=None):
    """
    Maximum-consistency ordering over all permutations.

    Dynamic programme over item subsets: placing item x directly above the
    already-placed set P adds the terms (y, x) for every y in P. Among optimal
    orderings the lexicographically smallest in catalog index is returned.
    """
    limits = limits or PlannerLimits()
    w = _Weights(items, m)
    n = len(w)
    if n > limits.exact_max_items:
        raise CapacityError(
            f"Exact planning is capped at {limits.exact_max_items} items, got {n}; "
            f"use the greedy or local_search method instead"
        )
    full = (1 << n) - 1
    # best[R]: best key for ordering the still-unplaced set R on top of full ^ R
    best_zeros = [0] * (full + 1)
    best_logs = [0.0] * (full + 1)

    def placing(placed, x):
        zeros = 0
        logs = 0.0
        for y in range(n):
            if placed >> y & 1:
                zeros += w.zeros[y][x]
                logs += w.logs[y][x]
        return zeros, logs

    for remaining in sorted(range(1, full + 1), key=lambda r: bin(r).count("1")):
        placed = full ^ remaining
        top = None
        for x in range(n):
            if not remaining >> x & 1:
                continue
            dz, dl = placing(placed, x)
            rest = remaining ^ (1 << x)
            key = (dz + best_zeros[rest], dl + best_logs[rest])
            if top is None or _better(key, top):
                top = key
        best_zeros[remaining], best_logs[remaining] = top

    order = []
    remaining = full
    while remaining:
        placed = full ^ remaining
        target = (best_zeros[remaining], best_logs[remaining])
        for x in range(n):
            if not remaining >> x & 1:
                continue
            dz, dl = placing(placed, x)
            rest = remaining ^ (1 << x)
            key = (dz + best_zeros[rest], dl + best_logs[rest])
            if not _better(target, key):
                order.append(x)
                remaining = rest
                break
    return w.sequence(order)


def _greedy_order(w):
    n = len(w)
    weights = [math.fsum(w.prob[i][k] for k in range(n) if k != i) for i in range(n)]
    return sorted(range(n), key=lambda i: (-weights[i], i))


def greedy_weights(items, m):
    """w_i = sum over the other items k of prob[i][k], keyed by item label."""
    w = _Weights(items, m)
    n = len(w)
    return {w.names[i]: math.fsum(w.prob[i][k] for k in range(n) if k != i) for i in range(n)}


def plan_greedy(items, m):
    """Sort by propensity to sit below the others; ties by catalog index."""
    w = _Weights(items, m)
    return w.sequence(_greedy_order(w))


def _insertion_descent(order, w):
    """Apply the best improving remove-and-reinsert move until none improves."""
    order = list(order)
    n = len(order)
    while True:
        best_move = None
        best_gain = (0, 0.0)
        for a in range(n):
            x = order[a]
            rest = order[:a] + order[a + 1:]
            # inserting x at slot j: rest[:j] below x, rest[j:] above x
            zeros = sum(w.zeros[x][y] for y in rest)
            logs = sum(w.logs[x][y] for y in rest)
            slots = [(zeros, logs)]
            for y in rest:
                zeros += w.zeros[y][x] - w.zeros[x][y]
                logs += w.logs[y][x] - w.logs[x][y]
                slots.append((zeros, logs))
            current = slots[a]
            for j, (z, lg) in enumerate(slots):
                if j == a:
                    continue
                gain = (z - current[0], lg - current[1])
                improves = gain[0] < 0 or (gain[0] == 0 and gain[1] > TIE_TOLERANCE)
                if not improves:
                    continue
                if best_move is None or gain[0] < best_gain[0] or (
                    gain[0] == best_gain[0] and gain[1] > best_gain[1]
                ):
                    best_move, best_gain = (a, j), gain
        if best_move is None:
            return order
        a, j = best_move
        x = order.pop(a)
        order.insert(j, x)


def plan_local_search(items, m, seed=0, restarts=8):
    """
    Best insertion-move local optimum over ``restarts`` starts.

    Restart 0 starts from the greedy order, the others from seeded random
    permutations; the earliest restart wins ties.
    """
    if restarts < 1:
        raise ConfigurationError(f"restarts must be at least 1, got {restarts}")
    w = _Weights(items, m)
    n = len(w)
    rng = np.random.default_rng(seed)
    starts = [_greedy_order(w)] + [rng.permutation(n).tolist() for _ in range(restarts - 1)]

    best_order, best_key = None, None
    for restart, start in enumerate(starts):
        order = _insertion_descent(start, w)
        key = w.key(order)
        logger.debug(f"Local search restart {restart}: key={key}")
        if best_key is None or _better(key, best_key):
            best_order, best_key = order, key
    return w.sequence(best_order)


def plan_random(items, seed=None):
    """Uniform random permutation of the items from a generator seeded with ``seed``."""
    items = [class_label(i) for i in items]
    if not items:
        raise LabelError("Cannot order an empty item list")
    rng = np.random.default_rng(seed)
    return PackingSequence(tuple(items[i] for i in rng.permutation(len(items))))


def plan(request, m, llm=None):
    """
    Dispatch a :class:`PlanRequest`.

    ``llm`` is a callable ``items -> PackingSequence`` used for the llm method.
    """
    method = request.method
    logger.info(f"Planning {len(request.items)} items with {method.value}")
    if method is Method.EXACT:
        return plan_exact(request.items, m, request.limits)
    if method is Method.GREEDY:
        return plan_greedy(request.items, m)
    if method is Method.LOCAL_SEARCH:
        seed = 0 if request.seed is None else request.seed
        return plan_local_search(request.items, m, seed, request.limits.local_search_restarts)
    if method is Method.RANDOM:
        return plan_random(request.items, request.seed)
    if llm is None:
        raise ConfigurationError("The llm method needs a configured provider")
    return llm(request.items)
