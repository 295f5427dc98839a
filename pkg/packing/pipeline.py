"""
Perception parsing, planning validation and the perception -> planning run
loop. Execution on a robot is not part of this package.
"""
import logging
from dataclasses import dataclass

from .catalog import dedup, normalize_label
from .conf import ValidationPolicy
from .exceptions import EmptyDetectionError, ValidationExhaustedError
from .prompts import TemplateSet, render_perception_prompt, render_planning_prompt
from .scoring import PackingSequence

logger = logging.getLogger(__name__)


def split_labels(raw):
    """Split at commas, normalize, drop empty fragments."""
    fragments = (normalize_label(fragment) for fragment in (raw or "").split(","))
    return [f for f in fragments if f]


def parse_detection(raw, lexicon, policy=None):
    """
    Comma-split a perception response and drop outliers.

    A fragment longer than ``outlier_multiplier`` times the lexicon's length
    standard deviation is treated as model commentary. Order and duplicates
    are kept.
    """
    policy = policy or ValidationPolicy()
    limit = policy.outlier_multiplier * lexicon.sigma
    labels = []
    for fragment in split_labels(raw):
        if len(fragment) > limit:
            logger.info(f"Dropping outlier label ({len(fragment)} chars > {limit:.1f}): {fragment!r}")
            continue
        labels.append(fragment)
    if not labels:
        raise EmptyDetectionError(f"No grocery labels left in perception response: {raw!r}", raw=raw)
    return labels


def appears(item, candidates):
    """Bidirectional substring containment on normalized labels."""
    item = normalize_label(item)
    return any(item in c or c in item for c in candidates)


def match_ratio(detected, candidates):
    if not detected:
        return 0.0
    return sum(1 for d in detected if appears(d, candidates)) / len(detected)


@dataclass(frozen=True)
class RetrySignal:
    response: str
    ratio: float


def validate_plan(detected, response, policy=None):
    """
    Accept the planning response when strictly more than ``match_threshold``
    of the detected items appear in it; otherwise ask for a retry.
    """
    policy = policy or ValidationPolicy()
    if not detected:
        raise EmptyDetectionError("Cannot validate a plan against an empty detection")
    candidates = split_labels(response)
    ratio = match_ratio(detected, candidates)
    if ratio > policy.match_threshold:
        return PackingSequence(tuple(candidates))
    logger.info(f"Planning response matched {ratio:.0%} of detected items; retry requested")
    return RetrySignal(response, ratio)


@dataclass(frozen=True)
class PlanningOutcome:
    sequence: PackingSequence
    attempts: int
    transcripts: tuple


def plan_with_llm(items, provider, templates=None, policy=None):
    """Planning step with the validation retry loop."""
    templates = templates or TemplateSet()
    policy = policy or ValidationPolicy()
    transcripts = []
    last_response = None
    for attempt in range(1, policy.max_attempts + 1):
        messages = render_planning_prompt(list(items), templates.planning)
        exchange = provider.complete(messages)
        transcripts.append(exchange)
        last_response = exchange.response
        outcome = validate_plan(items, exchange.response, policy)
        if isinstance(outcome, PackingSequence):
            return PlanningOutcome(outcome, attempt, tuple(transcripts))
    raise ValidationExhaustedError(
        f"Planning response failed validation {policy.max_attempts} times; last response: {last_response!r}",
        last_response=last_response,
        attempts=policy.max_attempts,
        transcripts=tuple(transcripts),
        detected=tuple(items),
    )


@dataclass(frozen=True)
class SceneInput:
    scene_id: str
    image: object = None
    items: tuple = None


@dataclass(frozen=True)
class PipelineResult:
    scene_id: str
    detected: tuple
    planned: PackingSequence
    attempts: int
    transcripts: tuple


def run_pipeline(scene, provider, templates=None, lexicon=None, policy=None, detect=True):
    """
    Perception (unless ``detect`` is False and ``scene.items`` is given),
    first-occurrence dedup, then planning with validation retries.
    """
    templates = templates or TemplateSet()
    policy = policy or ValidationPolicy()
    transcripts = []
    if detect:
        exchange = provider.complete(render_perception_prompt(templates.perception, scene.image))
        transcripts.append(exchange)
        try:
            detected = tuple(dedup(parse_detection(exchange.response, lexicon, policy)))
        except EmptyDetectionError as exc:
            exc.context["transcripts"] = tuple(transcripts)
            exc.context["scene_id"] = scene.scene_id
            raise
        logger.info(f"Scene {scene.scene_id}: detected {len(detected)} items")
    else:
        detected = tuple(dedup(normalize_label(i) for i in scene.items))
    try:
        planning = plan_with_llm(detected, provider, templates, policy)
    except ValidationExhaustedError as exc:
        exc.context["transcripts"] = tuple(transcripts) + exc.context["transcripts"]
        exc.context["scene_id"] = scene.scene_id
        raise
    return PipelineResult(
        scene.scene_id,
        detected,
        planning.sequence,
        planning.attempts,
        tuple(transcripts) + planning.transcripts,
    )
