"""
Pairwise placement-probability model built from human packing sequences.

``prob[i][k]`` is the probability that humans place class ``i`` below class
``k``. Sequences are stored bottom-first: index 0 is the lowest item.
"""
import hashlib
import json
import logging
from dataclasses import dataclass
from enum import Enum
from itertools import combinations

import numpy as np

from .catalog import ClassCatalog, class_label, dedup
from .exceptions import CorpusError, LabelError, MatrixFormatError, ModelBuildError

logger = logging.getLogger(__name__)

STRICT_TOLERANCE = 1e-9
# Published tables are rounded to three decimals.
LEGACY_TOLERANCE = 1e-3


class Direction(str, Enum):
    TOP_FIRST = "top_first"
    BOTTOM_FIRST = "bottom_first"


@dataclass(frozen=True)
class ParticipantSequence:
    participant: str
    items: tuple


@dataclass(frozen=True)
class SurveyCorpus:
    sequences: tuple
    direction: Direction = Direction.BOTTOM_FIRST

    def labels(self):
        return sorted({item for seq in self.sequences for item in seq.items})


def normalize_corpus(corpus):
    """Return the corpus bottom-first, labels normalized, repeats collapsed to first occurrence."""
    direction = Direction(corpus.direction)
    sequences = []
    for seq in corpus.sequences:
        try:
            items = dedup(class_label(item) for item in seq.items)
        except LabelError as exc:
            raise CorpusError(
                f"Participant {seq.participant}: {exc}", participant=seq.participant
            ) from exc
        if len(items) < 2:
            raise CorpusError(
                f"Participant {seq.participant}: sequence needs at least 2 distinct items, got {items}",
                participant=seq.participant,
            )
        if direction is Direction.TOP_FIRST:
            items.reverse()
        sequences.append(ParticipantSequence(str(seq.participant), tuple(items)))
    return SurveyCorpus(tuple(sequences), Direction.BOTTOM_FIRST)


def _frozen(array, dtype):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class PreferenceMatrix:
    catalog: ClassCatalog
    prob: np.ndarray
    count: np.ndarray
    observed: np.ndarray
    alpha: float = 0.0
    legacy: bool = False

    def __post_init__(self):
        n = len(self.catalog)
        object.__setattr__(self, "prob", _frozen(self.prob, np.float64))
        object.__setattr__(self, "count", _frozen(self.count, np.int64))
        object.__setattr__(self, "observed", _frozen(self.observed, bool))
        object.__setattr__(self, "alpha", float(self.alpha))
        for name in ("prob", "count", "observed"):
            if getattr(self, name).shape != (n, n):
                raise MatrixFormatError(
                    f"{name} must be {n}x{n}, got {getattr(self, name).shape}", path=name
                )

    @property
    def classes(self):
        return self.catalog.classes

    def __len__(self):
        return len(self.catalog)

    def __eq__(self, other):
        if not isinstance(other, PreferenceMatrix):
            return NotImplemented
        return (
            self.catalog.classes == other.catalog.classes
            and self.alpha == other.alpha
            and self.legacy == other.legacy
            and np.array_equal(self.prob, other.prob)
            and np.array_equal(self.count, other.count)
            and np.array_equal(self.observed, other.observed)
        )

    __hash__ = None

    def probability(self, lower, upper):
        """P(lower is placed below upper), labels resolved through the catalog."""
        return float(self.prob[self.catalog.index(lower), self.catalog.index(upper)])

    def with_aliases(self, aliases):
        return PreferenceMatrix(
            self.catalog.with_aliases(aliases), self.prob, self.count,
            self.observed, self.alpha, self.legacy,
        )

    def digest(self):
        canonical = json.dumps(serialize_matrix(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def build_matrix(corpus, alpha=0.0):
    if alpha is None or alpha < 0:
        raise ModelBuildError(f"alpha must be non-negative, got {alpha}")
    if not corpus.sequences:
        raise ModelBuildError("Cannot build a preference model from an empty corpus")
    corpus = normalize_corpus(corpus)

    classes = corpus.labels()
    index = {c: i for i, c in enumerate(classes)}
    n = len(classes)
    count = np.zeros((n, n), dtype=np.int64)
    for seq in corpus.sequences:
        for lower, upper in combinations(seq.items, 2):
            count[index[lower], index[upper]] += 1

    total = count + count.T
    observed = total > 0
    np.fill_diagonal(observed, False)
    numerator = count + alpha
    denominator = total + 2 * alpha
    prob = np.full((n, n), 0.5)
    np.divide(numerator, denominator, out=prob, where=observed)
    np.fill_diagonal(prob, 0.0)

    logger.info(
        f"Built preference model: {n} classes, {len(corpus.sequences)} sequences, "
        f"{int(observed.sum()) // 2} observed pairs, alpha={alpha}"
    )
    return PreferenceMatrix(ClassCatalog(tuple(classes)), prob, count, observed, alpha)


def serialize_matrix(m):
    document = {
        "classes": list(m.classes),
        "alpha": m.alpha,
        "prob": [[float(p) for p in row] for row in m.prob],
        "count": [[int(c) for c in row] for row in m.count],
        "observed": [[bool(o) for o in row] for row in m.observed],
    }
    if m.legacy:
        document["legacy"] = True
    return document


def deserialize_matrix(document):
    """
    Validate a matrix document and build the matrix.

    Self-produced documents must be complementary to 1e-9; documents flagged
    ``legacy`` (hand-imported, rounded tables) get 1e-3 slack and may omit
    ``count`` and ``observed``.
    """
    from .serializers import MatrixDocumentSerializer, flatten_errors

    serializer = MatrixDocumentSerializer(data=document)
    if not serializer.is_valid():
        path, message = flatten_errors(serializer.errors)[0]
        raise MatrixFormatError(f"Invalid matrix document at '{path}': {message}", path=path)
    data = serializer.validated_data

    try:
        catalog = ClassCatalog(tuple(data["classes"]))
    except LabelError as exc:
        raise MatrixFormatError(f"Invalid matrix document at 'classes': {exc}", path="classes") from exc
    n = len(catalog)
    legacy = data.get("legacy", False)

    def square(name, default):
        rows = data.get(name)
        if rows is None:
            if not legacy:
                raise MatrixFormatError(f"Invalid matrix document at '{name}': field is required", path=name)
            return default
        if len(rows) != n:
            raise MatrixFormatError(
                f"Invalid matrix document at '{name}': expected {n} rows, got {len(rows)}", path=name
            )
        for i, row in enumerate(rows):
            if len(row) != n:
                raise MatrixFormatError(
                    f"Invalid matrix document at '{name}.{i}': expected {n} entries, got {len(row)}",
                    path=f"{name}.{i}",
                )
        return rows

    off_diagonal = ~np.eye(n, dtype=bool)
    prob = np.array(square("prob", None), dtype=np.float64)
    count = np.array(square("count", np.zeros((n, n), dtype=np.int64)), dtype=np.int64)
    observed = np.array(square("observed", off_diagonal), dtype=bool)

    for i in range(n):
        for k in range(n):
            p = prob[i, k]
            if not 0.0 <= p <= 1.0:
                raise MatrixFormatError(
                    f"Invalid matrix document at 'prob.{i}.{k}': probability {p} outside [0, 1]",
                    path=f"prob.{i}.{k}",
                )
        if prob[i, i] != 0.0:
            raise MatrixFormatError(
                f"Invalid matrix document at 'prob.{i}.{i}': diagonal must be 0", path=f"prob.{i}.{i}"
            )

    tolerance = LEGACY_TOLERANCE if legacy else STRICT_TOLERANCE
    for i, k in combinations(range(n), 2):
        if abs(prob[i, k] + prob[k, i] - 1.0) > tolerance + 1e-12:
            raise MatrixFormatError(
                f"Invalid matrix document at 'prob.{i}.{k}': "
                f"prob[{i}][{k}] + prob[{k}][{i}] = {prob[i, k] + prob[k, i]} is not 1",
                path=f"prob.{i}.{k}",
            )
    if not legacy:
        expected = (count + count.T > 0) & off_diagonal
        mismatch = np.argwhere(observed != expected)
        if len(mismatch):
            i, k = mismatch[0]
            raise MatrixFormatError(
                f"Invalid matrix document at 'observed.{i}.{k}': disagrees with count",
                path=f"observed.{i}.{k}",
            )

    return PreferenceMatrix(catalog, prob, count, observed, data["alpha"], legacy)


def dump_matrix(m, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(serialize_matrix(m), f, indent=2)
        f.write("\n")


def load_matrix(path):
    try:
        with open(path, encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as exc:
        raise MatrixFormatError(f"{path}:{exc.lineno}: {exc.msg}", path="") from exc
    except OSError as exc:
        raise MatrixFormatError(f"Cannot read matrix file {path}: {exc}", path="") from exc
    return deserialize_matrix(document)
