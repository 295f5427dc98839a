"""
Packing Consistency Score: the log-likelihood of a bottom-first sequence
under the pairwise placement probabilities.
"""
import math
from dataclasses import dataclass
from itertools import combinations

from .catalog import class_label
from .exceptions import AggregationError, LabelError, ScoringError


NEG_INF = float("-inf")


@dataclass(frozen=True)
class PackingSequence:
    """Ordered class labels, bottom-first."""

    items: tuple

    def __post_init__(self):
        if not self.items:
            raise LabelError("A packing sequence needs at least one item")
        object.__setattr__(self, "items", tuple(class_label(i) for i in self.items))

    @classmethod
    def from_labels(cls, labels, top_first=False):
        items = [class_label(label) for label in labels]
        if top_first:
            items.reverse()
        return cls(tuple(items))

    @classmethod
    def parse(cls, text, top_first=False):
        """``"a, b, c"`` -> sequence; empty fragments are ignored."""
        return cls.from_labels([f for f in text.split(",") if f.strip()], top_first=top_first)

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __str__(self):
        return ", ".join(self.items)


@dataclass(frozen=True)
class PairTerm:
    lower: str
    upper: str
    p: int
    q: int
    probability: float
    log_prob: float


@dataclass(frozen=True)
class ConsistencyScore:
    value: float
    pair_terms: tuple = ()

    @property
    def is_infinite(self):
        return self.value == NEG_INF

    @property
    def zero_pairs(self):
        return sum(1 for t in self.pair_terms if t.probability == 0.0)


@dataclass(frozen=True)
class AverageScore:
    value: float
    infinite_count: int
    count: int


def resolve_indices(labels, m):
    indices = []
    for label in labels:
        resolved = m.catalog.resolve(label)
        if resolved is None:
            raise ScoringError(f"Label {label!r} is not a class of the preference model", label=label)
        indices.append(m.catalog.index(resolved))
    return indices


def log_prob(p):
    return math.log(p) if p > 0.0 else NEG_INF


def score(s, m):
    """
    Sum of ln prob[class(p)][class(q)] over position pairs p < q.

    Same-class pairs contribute nothing; a single item scores 0; any
    zero-probability pair makes the score -inf.
    """
    indices = resolve_indices(s.items, m)
    classes = m.classes
    terms = []
    for p, q in combinations(range(len(indices)), 2):
        a, b = indices[p], indices[q]
        if a == b:
            continue
        prob = float(m.prob[a, b])
        terms.append(PairTerm(classes[a], classes[b], p, q, prob, log_prob(prob)))
    if any(t.log_prob == NEG_INF for t in terms):
        value = NEG_INF
    else:
        value = math.fsum(t.log_prob for t in terms)
    return ConsistencyScore(value, tuple(terms))


def average_score(scores):
    """Arithmetic mean over scenes; -inf if any scene scored -inf."""
    values = [s.value if isinstance(s, ConsistencyScore) else float(s) for s in scores]
    if not values:
        raise AggregationError("Cannot average an empty list of scores")
    infinite = sum(1 for v in values if v == NEG_INF)
    value = NEG_INF if infinite else math.fsum(values) / len(values)
    return AverageScore(value, infinite, len(values))


def constraint_satisfaction_rate(s, m):
    """Fraction of distinct-class position pairs whose placement has probability >= 0.5."""
    if len(s) < 2:
        raise ScoringError("Satisfaction rate is undefined for fewer than 2 items")
    indices = resolve_indices(s.items, m)
    pairs = [(a, b) for a, b in combinations(indices, 2) if a != b]
    if not pairs:
        raise ScoringError("Satisfaction rate is undefined without two distinct classes")
    satisfied = sum(1 for a, b in pairs if m.prob[a, b] >= 0.5)
    return satisfied / len(pairs)


def format_score(value):
    if value is None:
        return "n/a"
    if value == NEG_INF:
        return "-inf"
    return f"{value:.4f}"


def encode_extended(value):
    """JSON-safe form of an extended real."""
    if value is None:
        return None
    if value == NEG_INF:
        return "-inf"
    return value


def decode_extended(value):
    if value == "-inf":
        return NEG_INF
    return value
