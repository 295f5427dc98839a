from unittest import mock

from celery import group
from celery.exceptions import Retry
from django.test import SimpleTestCase

from packing.conf import ProviderConfig, ProviderKind
from packing.dataset import load_scene_set
from packing.evaluation import SceneEvaluator
from packing.exceptions import ProviderTransportError
from packing.preference import load_matrix
from packing.prompts import TemplateSet, load_lexicon
from packing.provider import MockProvider, load_fixture_bundle
from packing.tasks import evaluate_in_waves, evaluate_scene, scene_task_arguments
from packorder.celery import app as celery_app

from .factories import FIXTURES


class EvaluateSceneTaskTests(SimpleTestCase):
    def setUp(self):
        self.scene_set = load_scene_set(FIXTURES / "scenes_small.json")
        self.matrix = load_matrix(FIXTURES / "grocery_matrix.json")
        self.bundle = load_fixture_bundle(FIXTURES / "mock_bundle.json")
        self.provider = ProviderConfig(kind=ProviderKind.MOCK, fixtures_path=str(FIXTURES / "mock_bundle.json"))
        self.evaluator = SceneEvaluator(self.matrix, TemplateSet(), load_lexicon(), baseline_seeds=2)

    def arguments(self, scene):
        return scene_task_arguments(scene, self.scene_set, self.matrix, self.provider, self.evaluator, self.bundle)

    def test_arguments_are_plain_data(self):
        scene_doc, matrix_doc, options = self.arguments(self.scene_set.scenes[0])
        self.assertEqual(scene_doc["id"], "s1")
        self.assertEqual(options["provider"]["kind"], "mock")
        self.assertEqual(len(options["fixtures"]), 2)
        self.assertEqual(matrix_doc["classes"], list(self.matrix.classes))

    def test_task_matches_local_evaluation(self):
        for scene in self.scene_set.scenes:
            expected = self.evaluator.evaluate(scene, MockProvider(self.bundle.records_for(scene.scene_id)))
            result = evaluate_scene.apply(args=self.arguments(scene)).get()
            self.assertEqual(result, expected.to_document())

    def test_task_scores_the_plan(self):
        result = evaluate_scene.apply(args=self.arguments(self.scene_set.scenes[0])).get()
        self.assertEqual(result["planned"], ["bottle", "apples", "bell pepper", "bananas"])
        self.assertAlmostEqual(result["score"], -0.979, places=3)
        self.assertIsNotNone(result["baseline"])

    def test_transport_failure_is_retried(self):
        args = self.arguments(self.scene_set.scenes[1])
        failure = ProviderTransportError("connection refused")
        with mock.patch("packing.tasks.SceneEvaluator.evaluate", side_effect=failure), \
                mock.patch.object(evaluate_scene, "retry", side_effect=Retry()) as retry:
            with self.assertRaises(Retry):
                evaluate_scene(*args)
        retry.assert_called_once_with(exc=failure, countdown=60)


class EvaluateInWavesTests(SimpleTestCase):
    def setUp(self):
        eager = {"task_always_eager": True, "task_eager_propagates": True}
        previous = {key: celery_app.conf[key] for key in eager}
        celery_app.conf.update(eager)
        self.addCleanup(celery_app.conf.update, previous)
        scene_set = load_scene_set(FIXTURES / "scenes_small.json")
        provider = ProviderConfig(kind=ProviderKind.MOCK, fixtures_path=str(FIXTURES / "mock_bundle.json"))
        matrix = load_matrix(FIXTURES / "grocery_matrix.json")
        evaluator = SceneEvaluator(matrix, TemplateSet(), load_lexicon())
        bundle = load_fixture_bundle(FIXTURES / "mock_bundle.json")
        self.scenes = scene_set.scenes
        self.signatures = [
            evaluate_scene.s(*scene_task_arguments(scene, scene_set, matrix, provider, evaluator, bundle))
            for scene in self.scenes
        ]

    def test_waves_never_exceed_the_limit(self):
        with mock.patch("packing.tasks.group", wraps=group) as dispatched:
            results = evaluate_in_waves(self.signatures, 2)
        self.assertEqual([len(c.args[0]) for c in dispatched.call_args_list], [2, 1])
        self.assertEqual([r["id"] for r in results], [s.scene_id for s in self.scenes])

    def test_one_wave_without_a_limit(self):
        with mock.patch("packing.tasks.group", wraps=group) as dispatched:
            results = evaluate_in_waves(self.signatures)
        self.assertEqual(dispatched.call_count, 1)
        self.assertEqual(len(results), len(self.scenes))
