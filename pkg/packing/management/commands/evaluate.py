import json
import os

from packing.conf import ProviderKind, override
from packing.dataset import load_aliases, load_scene_set
from packing.evaluation import (
    SceneEvaluator,
    SceneOutcome,
    build_provenance,
    evaluate_scenes,
    fixtures_from_report,
)
from packing.exceptions import EvaluationError
from packing.metrics import assemble_report, render_table, write_series_csv
from packing.models import EvaluationRun
from packing.preference import load_matrix
from packing.prompts import load_lexicon, load_templates
from packing.provider import LiveProvider, MockProvider, load_fixture_bundle
from packing.tasks import evaluate_in_waves, evaluate_scene, scene_task_arguments

from ._base import PackingCommand, add_provider_arguments, provider_config


class Command(PackingCommand):
    help = (
        "Run perception and planning over a scene set and report detection "
        "F1, Packing Consistency Score and success rate."
    )

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--scenes", required=True, help="Scene set file {catalog, size_range, scenes}")
        parser.add_argument("--matrix", required=True, help="Preference model document")
        add_provider_arguments(parser)
        parser.add_argument("--replay", metavar="REPORT", help="Replay the transcripts stored in an earlier report")
        parser.add_argument("--lexicon", help="Reference lexicon for outlier rejection (one label per line)")
        parser.add_argument("--aliases", help="Alias file mapping free-form labels to classes")
        parser.add_argument("--mode", choices=["full", "planning"], default="full",
                            help="full: perception then planning; planning: plan the ground-truth items")
        parser.add_argument("--success-rate", choices=["items", "runs"], default="items",
                            help="Headline success rate: surviving detected items, or scenes with an accepted plan")
        parser.add_argument("--baseline-seeds", type=int, default=0,
                            help="Also score this many seeded random orders per scene")
        parser.add_argument("--seed", type=int, help="Base seed for random baselines (default from settings)")
        parser.add_argument("--jobs", type=int, help="Scenes evaluated concurrently (default: processor count)")
        parser.add_argument("--backend", choices=["threads", "celery"], default="threads")
        parser.add_argument("--open-vocabulary", action="store_true",
                            help="Accept ground-truth labels outside the scene set catalog")
        parser.add_argument("--out", help="Write the report document here")
        parser.add_argument("--series", help="Write the per-scene-size CSV series here")
        parser.add_argument("--save", metavar="NAME", help="Store the report in the database under NAME")

    def run(self, config, **options):
        if options["baseline_seeds"] < 0:
            raise EvaluationError("--baseline-seeds must be non-negative")
        detect = options["mode"] == "full"
        seed = config.seed if options["seed"] is None else options["seed"]

        bundle = None
        if options["replay"]:
            try:
                with open(options["replay"], encoding="utf-8") as f:
                    bundle = fixtures_from_report(json.load(f))
            except (OSError, ValueError, KeyError, TypeError) as exc:
                raise EvaluationError(f"Cannot replay {options['replay']}: {exc}") from exc
            provider = override(config.provider, kind=ProviderKind.MOCK, fixtures_path=options["replay"])
        else:
            provider = provider_config(config, options)
            if provider.kind is ProviderKind.MOCK:
                bundle = load_fixture_bundle(provider.fixtures_path)

        scene_set = load_scene_set(
            options["scenes"],
            enforce_catalog=not options["open_vocabulary"],
            default_range=config.size_range,
        )
        matrix = load_matrix(options["matrix"])
        aliases = load_aliases(options["aliases"]) if options["aliases"] else {}
        if aliases:
            matrix = matrix.with_aliases(aliases)
        templates = load_templates(options["templates"], config.templates)
        lexicon_path = options["lexicon"] or config.lexicon_path
        lexicon = load_lexicon(lexicon_path) if detect else None

        evaluator = SceneEvaluator(
            matrix, templates, lexicon, config.policy, detect=detect,
            baseline_seeds=options["baseline_seeds"], seed=seed,
        )

        if options["backend"] == "celery":
            signatures = [
                evaluate_scene.s(*scene_task_arguments(scene, scene_set, matrix, provider, evaluator, bundle, lexicon_path))
                for scene in scene_set.scenes
            ]
            wave = options["jobs"]
            if provider.kind is ProviderKind.LIVE:
                wave = min(wave or provider.max_in_flight, provider.max_in_flight)
            outcomes = [SceneOutcome.from_document(doc) for doc in evaluate_in_waves(signatures, wave)]
        else:
            jobs = options["jobs"] or os.cpu_count() or 1
            if provider.kind is ProviderKind.LIVE:
                shared = LiveProvider(provider)
                jobs = min(jobs, provider.max_in_flight)

                def provider_for(scene):
                    return shared
            else:
                def provider_for(scene):
                    return MockProvider(bundle.records_for(scene.scene_id))

            outcomes = evaluate_scenes(scene_set, evaluator, provider_for, jobs)

        provenance = build_provenance(
            matrix, provider, templates, config.policy, seed, detect,
            options["baseline_seeds"], len(scene_set),
        )
        report = assemble_report(
            scene_set.scenes, outcomes, provenance, detect=detect,
            aliases=aliases, catalog=matrix.catalog, success_definition=options["success_rate"],
        )

        if options["out"]:
            with open(options["out"], "w", encoding="utf-8") as f:
                f.write(report.dumps())
        if options["series"]:
            write_series_csv(report, options["series"])
        if options["save"]:
            self._save(options["save"], report, provider, matrix)
        self.stdout.write(render_table(report), ending="")

    def _save(self, name, report, provider, matrix):
        ac = report.average_score
        run = EvaluationRun.objects.create(
            name=name,
            report=report.to_document(),
            mode=report.mode,
            provider_kind=provider.kind.value,
            scene_count=len(report.scenes),
            average_score=None if ac is None or ac == float("-inf") else ac,
            infinite_count=report.planning["infinite_count"],
            success_rate=report.planning["success_rate"],
            matrix_digest=matrix.digest(),
        )
        self.stdout.write(f"Saved evaluation run '{run.name}' (id {run.pk})")
