"""
Loaders for scene sets, survey corpora and alias tables, plus a synthetic
survey generator for tests and benchmarks.
"""
import json
import logging
import mimetypes
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .catalog import ClassCatalog, class_label, normalize_label
from .exceptions import ConfigurationError, DatasetError, LabelError
from .metrics import SceneRecord
from .preference import Direction, ParticipantSequence, SurveyCorpus, normalize_corpus
from .provider import ImagePayload

logger = logging.getLogger(__name__)


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise DatasetError(f"Cannot read {path}: {exc}") from exc


def _validated(serializer_class, document, path, many=False):
    from .serializers import flatten_errors

    serializer = serializer_class(data=document, many=many)
    if not serializer.is_valid():
        where, message = flatten_errors(serializer.errors)[0]
        raise DatasetError(f"{path}: schema violation at '{where}': {message}")
    return serializer.validated_data


@dataclass(frozen=True)
class SceneSet:
    scenes: tuple
    catalog: ClassCatalog
    size_range: tuple
    root: Path = None

    def __len__(self):
        return len(self.scenes)

    def sizes(self):
        return sorted({s.size for s in self.scenes})

    def load_image(self, scene):
        """Raw bytes of the scene image, or None; never decoded."""
        if not scene.image:
            return None
        path = Path(scene.image)
        if not path.is_absolute() and self.root is not None:
            path = self.root / path
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise DatasetError(f"Cannot read image for scene {scene.scene_id}: {exc}") from exc
        media_type = mimetypes.guess_type(str(path))[0] or "application/octet-stream"
        return ImagePayload(data, media_type)


def load_scene_set(path, size_range=None, enforce_catalog=True, default_range=(6, 20)):
    """
    Scene file: ``{catalog, size_range, scenes: [{id, size, ground_truth, image}]}``.

    ``size_range`` overrides the file's declared range, which in turn
    overrides ``default_range``. With ``enforce_catalog`` every ground-truth
    label must be a catalog class.
    """
    from .serializers import SceneSetDocumentSerializer

    data = _validated(SceneSetDocumentSerializer, _read_json(path), path)
    try:
        catalog = ClassCatalog(tuple(data["catalog"]))
    except LabelError as exc:
        raise DatasetError(f"{path}: invalid catalog: {exc}") from exc
    low, high = size_range or data.get("size_range") or default_range

    scenes = []
    seen = set()
    for i, entry in enumerate(data["scenes"]):
        scene_id = entry["id"]
        where = f"{path}: scenes.{i} ({scene_id})"
        if scene_id in seen:
            raise DatasetError(f"{where}: duplicate scene id")
        seen.add(scene_id)
        try:
            truth = tuple(class_label(label) for label in entry["ground_truth"])
        except LabelError as exc:
            raise DatasetError(f"{where}: {exc}") from exc
        if entry["size"] != len(truth):
            raise DatasetError(f"{where}: size {entry['size']} does not match {len(truth)} ground-truth labels")
        if not low <= entry["size"] <= high:
            raise DatasetError(f"{where}: scene size {entry['size']} outside declared range [{low}, {high}]")
        if enforce_catalog and len(catalog):
            unknown = [label for label in truth if label not in catalog]
            if unknown:
                raise DatasetError(f"{where}: labels not in catalog: {unknown}")
        scenes.append(SceneRecord(scene_id, entry["size"], truth, entry.get("image") or None))

    logger.info(f"Loaded {len(scenes)} scenes from {path}")
    return SceneSet(tuple(scenes), catalog, (low, high), Path(path).resolve().parent)


def load_survey(path):
    """Survey file: ``{direction, sequences: [{participant, items}]}``, returned bottom-first."""
    from .serializers import SurveyDocumentSerializer

    data = _validated(SurveyDocumentSerializer, _read_json(path), path)
    corpus = SurveyCorpus(
        tuple(ParticipantSequence(s["participant"], tuple(s["items"])) for s in data["sequences"]),
        Direction(data["direction"]),
    )
    normalized = normalize_corpus(corpus)
    logger.info(f"Loaded survey {path}: {len(normalized.sequences)} sequences ({corpus.direction.value})")
    return normalized


def load_aliases(path):
    """Alias file: JSON object mapping free-form label -> canonical class."""
    document = _read_json(path)
    if not isinstance(document, dict):
        raise DatasetError(f"{path}: alias file must hold an object")
    aliases = {}
    for key, value in document.items():
        if not isinstance(value, str):
            raise DatasetError(f"{path}: alias '{key}' must map to a string")
        try:
            aliases[normalize_label(key)] = class_label(value)
        except LabelError as exc:
            raise DatasetError(f"{path}: alias '{key}': {exc}") from exc
    return aliases


def synth_corpus(catalog, true_order, noise, participants, seed=0, min_items=2, max_items=None,
                 sequences_per_participant=1):
    """
    Seeded synthetic survey.

    Each sequence samples a subset of the catalog, orders it by ``true_order``
    (bottom-first) and swaps each adjacent pair with probability ``noise``.
    """
    if not 0.0 <= noise <= 0.5:
        raise ConfigurationError(f"noise must be within [0, 0.5], got {noise}")
    classes = list(catalog)
    rank = {class_label(c): r for r, c in enumerate(true_order)}
    if set(rank) != set(classes):
        raise ConfigurationError("true_order must be a permutation of the catalog")
    n = len(classes)
    max_items = min(max_items or n, n)
    if not 2 <= min_items <= max_items:
        raise ConfigurationError(f"Need 2 <= min_items <= max_items <= {n}")

    rng = np.random.default_rng(seed)
    sequences = []
    for k in range(participants):
        for _ in range(sequences_per_participant):
            size = int(rng.integers(min_items, max_items + 1))
            subset = [classes[i] for i in rng.choice(n, size=size, replace=False)]
            items = sorted(subset, key=rank.__getitem__)
            for j in range(size - 1):
                if rng.random() < noise:
                    items[j], items[j + 1] = items[j + 1], items[j]
            sequences.append(ParticipantSequence(f"synth-{k:04d}", tuple(items)))
    return SurveyCorpus(tuple(sequences), Direction.BOTTOM_FIRST)
