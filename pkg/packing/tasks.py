import logging
from dataclasses import asdict
from pathlib import Path

from celery import group, shared_task

from .catalog import ClassCatalog
from .conf import ProviderConfig, ProviderKind, ValidationPolicy
from .dataset import SceneSet
from .evaluation import SceneEvaluator
from .exceptions import ProviderTransportError
from .metrics import SceneRecord
from .preference import deserialize_matrix, serialize_matrix
from .prompts import load_lexicon, templates_from_document
from .provider import FixtureRecord, LiveProvider, MockProvider

logger = logging.getLogger(__name__)


def scene_task_arguments(scene, scene_set, matrix, provider_config, evaluator, bundle=None, lexicon_path=None):
    """JSON-serializable arguments for :func:`evaluate_scene`."""
    provider = asdict(provider_config)
    provider["kind"] = provider_config.kind.value
    fixtures = None
    if provider_config.kind is ProviderKind.MOCK:
        fixtures = [{"response": r.response, "fingerprint": r.fingerprint} for r in bundle.records_for(scene.scene_id)]
    scene_doc = {
        "id": scene.scene_id,
        "size": scene.size,
        "ground_truth": list(scene.ground_truth),
        "image": scene.image,
    }
    options = {
        "provider": provider,
        "fixtures": fixtures,
        "policy": asdict(evaluator.policy),
        "templates": evaluator.templates.to_document(),
        "lexicon_path": None if lexicon_path is None else str(lexicon_path),
        "detect": evaluator.detect,
        "baseline_seeds": evaluator.baseline_seeds,
        "seed": evaluator.seed,
        "image_root": None if scene_set.root is None else str(scene_set.root),
    }
    return scene_doc, serialize_matrix(matrix), options


def evaluate_in_waves(signatures, wave_size=None):
    """
    Run scene tasks in groups of at most ``wave_size``, collecting each group
    before dispatching the next.

    Each task builds its own provider, so the per-provider request limit does
    not span tasks; the wave size is what bounds concurrent live requests.
    """
    signatures = list(signatures)
    wave_size = wave_size or len(signatures) or 1
    results = []
    for start in range(0, len(signatures), wave_size):
        wave = signatures[start:start + wave_size]
        logger.info(f"Dispatching scenes {start + 1}-{start + len(wave)} of {len(signatures)}")
        results.extend(group(wave).apply_async().get(disable_sync_subtasks=False))
    return results


@shared_task(bind=True, max_retries=3)
def evaluate_scene(self, scene_doc, matrix_doc, options):
    scene = SceneRecord(scene_doc["id"], scene_doc["size"], tuple(scene_doc["ground_truth"]), scene_doc.get("image"))
    matrix = deserialize_matrix(matrix_doc)
    detect = options["detect"]
    evaluator = SceneEvaluator(
        matrix,
        templates=templates_from_document(options["templates"]),
        lexicon=load_lexicon(options["lexicon_path"]) if detect else None,
        policy=ValidationPolicy(**options["policy"]),
        detect=detect,
        baseline_seeds=options["baseline_seeds"],
        seed=options["seed"],
    )
    config = ProviderConfig(**options["provider"])
    if config.kind is ProviderKind.LIVE:
        provider = LiveProvider(config)
    else:
        provider = MockProvider(FixtureRecord(r["response"], r["fingerprint"]) for r in options["fixtures"])

    root = options.get("image_root")
    holder = SceneSet((scene,), ClassCatalog(()), (scene.size, scene.size), Path(root) if root else None)
    image = holder.load_image(scene) if detect else None
    try:
        outcome = evaluator.evaluate(scene, provider, image)
    except ProviderTransportError as exc:
        logger.warning(f"Scene {scene.scene_id}: provider unreachable, retrying: {exc}")
        raise self.retry(exc=exc, countdown=60)
    logger.info(f"Scene {scene.scene_id} evaluated in {outcome.attempts} planning attempts")
    return outcome.to_document()
