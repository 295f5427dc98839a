"""
Scene evaluation shared by the ``evaluate`` command, the Celery task and
report replay.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .catalog import dedup
from .conf import ValidationPolicy
from .exceptions import EmptyDetectionError, ScoringError, ValidationExhaustedError
from .pipeline import SceneInput, run_pipeline
from .planner import plan_random
from .prompts import TemplateSet
from .provider import FixtureBundle, FixtureRecord
from .scoring import (
    NEG_INF,
    ConsistencyScore,
    PackingSequence,
    PairTerm,
    average_score,
    constraint_satisfaction_rate,
    decode_extended,
    encode_extended,
    score,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SceneOutcome:
    scene_id: str
    size: int
    ground_truth: tuple
    detected: tuple
    planned: tuple
    resolved: tuple
    unmatched: tuple
    score: ConsistencyScore
    satisfaction: float
    attempts: int
    latency: float
    transcripts: tuple
    baseline: float = None
    error: str = None

    def to_document(self):
        return {
            "id": self.scene_id,
            "size": self.size,
            "ground_truth": list(self.ground_truth),
            "detected": list(self.detected),
            "planned": None if self.planned is None else list(self.planned),
            "resolved": list(self.resolved),
            "unmatched": list(self.unmatched),
            "score": None if self.score is None else encode_extended(self.score.value),
            "pair_terms": None if self.score is None else [
                [t.lower, t.upper, t.p, t.q, t.probability, encode_extended(t.log_prob)]
                for t in self.score.pair_terms
            ],
            "satisfaction_rate": self.satisfaction,
            "attempts": self.attempts,
            "latency": self.latency,
            "transcripts": list(self.transcripts),
            "baseline": encode_extended(self.baseline),
            "error": self.error,
        }

    @classmethod
    def from_document(cls, doc):
        consistency = None
        if doc["score"] is not None:
            terms = tuple(
                PairTerm(lower, upper, p, q, prob, decode_extended(lp))
                for lower, upper, p, q, prob, lp in doc["pair_terms"]
            )
            consistency = ConsistencyScore(decode_extended(doc["score"]), terms)
        return cls(
            scene_id=doc["id"],
            size=doc["size"],
            ground_truth=tuple(doc["ground_truth"]),
            detected=tuple(doc["detected"]),
            planned=None if doc["planned"] is None else tuple(doc["planned"]),
            resolved=tuple(doc["resolved"]),
            unmatched=tuple(doc["unmatched"]),
            score=consistency,
            satisfaction=doc["satisfaction_rate"],
            attempts=doc["attempts"],
            latency=doc["latency"],
            transcripts=tuple(doc["transcripts"]),
            baseline=decode_extended(doc["baseline"]),
            error=doc["error"],
        )


def resolve_planned(planned, matrix):
    """Split planned labels into catalog classes and labels the catalog cannot place."""
    resolved, unmatched = [], []
    for label in planned:
        cls = matrix.catalog.resolve(label)
        if cls is None:
            unmatched.append(label)
        else:
            resolved.append(cls)
    return tuple(resolved), tuple(unmatched)


def random_baseline(items, matrix, seeds, base_seed=0):
    """Mean C of ``seeds`` random orders of ``items`` (seeds base_seed, base_seed+1, ...)."""
    items = dedup(items)
    scores = [score(plan_random(items, base_seed + s), matrix) for s in range(seeds)]
    return average_score(scores).value


class SceneEvaluator:
    """Runs one scene through the pipeline and scores the accepted plan."""

    def __init__(self, matrix, templates=None, lexicon=None, policy=None, detect=True,
                 baseline_seeds=0, seed=0):
        self.matrix = matrix
        self.templates = templates or TemplateSet()
        self.lexicon = lexicon
        self.policy = policy or ValidationPolicy()
        self.detect = detect
        self.baseline_seeds = baseline_seeds
        self.seed = seed

    def evaluate(self, scene, provider, image=None):
        scene_input = SceneInput(scene.scene_id, image, scene.ground_truth)
        try:
            result = run_pipeline(
                scene_input, provider, self.templates, self.lexicon, self.policy, detect=self.detect
            )
        except (EmptyDetectionError, ValidationExhaustedError) as exc:
            logger.warning(f"Scene {scene.scene_id}: {exc}")
            transcripts = exc.context.get("transcripts", ())
            return SceneOutcome(
                scene.scene_id, scene.size, scene.ground_truth,
                tuple(exc.context.get("detected", ())), None, (), (), None, None,
                exc.context.get("attempts", 0), math.fsum(t.latency for t in transcripts),
                tuple(t.to_document() for t in transcripts),
                self._baseline(scene.ground_truth), exc.category,
            )

        planned = tuple(result.planned.items)
        resolved, unmatched = resolve_planned(planned, self.matrix)
        if unmatched:
            logger.info(f"Scene {scene.scene_id}: {len(unmatched)} planned labels outside the catalog")
        consistency = score(PackingSequence(resolved), self.matrix) if resolved else None
        try:
            satisfaction = constraint_satisfaction_rate(PackingSequence(resolved), self.matrix) if resolved else None
        except ScoringError:
            satisfaction = None
        return SceneOutcome(
            scene.scene_id, scene.size, scene.ground_truth, result.detected, planned,
            resolved, unmatched, consistency, satisfaction, result.attempts,
            math.fsum(t.latency for t in result.transcripts),
            tuple(t.to_document() for t in result.transcripts),
            self._baseline(scene.ground_truth),
        )

    def _baseline(self, truth):
        if not self.baseline_seeds:
            return None
        resolved, _ = resolve_planned(truth, self.matrix)
        if not resolved:
            return None
        return random_baseline(resolved, self.matrix, self.baseline_seeds, self.seed)


def evaluate_scenes(scene_set, evaluator, provider_for, jobs=1):
    """
    Evaluate every scene, ``jobs`` at a time; results keep scene order.

    ``provider_for(scene)`` returns the client for that scene.
    """
    def run(scene):
        image = scene_set.load_image(scene) if evaluator.detect else None
        return evaluator.evaluate(scene, provider_for(scene), image)

    if jobs <= 1:
        return [run(scene) for scene in scene_set.scenes]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run, scene_set.scenes))


def fixtures_from_report(document):
    """Fixture bundle replaying every stored transcript of a report, keyed by scene."""
    scenes = {}
    for scene in document["scenes"]:
        scenes[scene["id"]] = tuple(
            FixtureRecord(t["response"], t["fingerprint"]) for t in scene["transcripts"]
        )
    return FixtureBundle((), scenes)


def build_provenance(matrix, provider_config, templates, policy, seed, detect, baseline_seeds,
                     scene_count):
    return {
        "matrix_sha256": matrix.digest(),
        "provider": provider_config.public_dict(),
        "templates": templates.digests(),
        "policy": {
            "match_threshold": policy.match_threshold,
            "max_attempts": policy.max_attempts,
            "outlier_multiplier": policy.outlier_multiplier,
        },
        "seed": seed,
        "mode": "full" if detect else "planning",
        "baseline_seeds": baseline_seeds,
        "scene_count": scene_count,
    }


__all__ = [
    "NEG_INF",
    "SceneEvaluator",
    "SceneOutcome",
    "build_provenance",
    "evaluate_scenes",
    "fixtures_from_report",
    "random_baseline",
    "resolve_planned",
]
