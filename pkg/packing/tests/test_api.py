import json

from django.core.cache import cache
from rest_framework.test import APITestCase

from packing.models import EvaluationRun, PreferenceModel
from packing.preference import load_matrix

from .factories import FIXTURES

OPTIMUM = ["bottle", "apples", "bell pepper", "bananas"]


class PreferenceModelApiTests(APITestCase):
    def setUp(self):
        cache.clear()
        document = json.loads((FIXTURES / "grocery_matrix.json").read_text())
        matrix = load_matrix(FIXTURES / "grocery_matrix.json")
        self.model = PreferenceModel.objects.create(
            name="table", document=document, digest=matrix.digest(), class_count=len(matrix), alpha=matrix.alpha,
        )

    def url(self, suffix=""):
        return f"/api/models/{self.model.pk}/{suffix}"

    def test_list_and_retrieve(self):
        listing = self.client.get("/api/models/")
        self.assertEqual(listing.status_code, 200)
        self.assertEqual([m["name"] for m in listing.json()], ["table"])

        detail = self.client.get(self.url()).json()
        self.assertEqual(detail["class_count"], 4)
        self.assertEqual(detail["classes"], ["bottle", "apples", "bananas", "bell pepper"])

    def test_missing_model(self):
        self.assertEqual(self.client.get("/api/models/999/").status_code, 404)
        response = self.client.post("/api/models/999/score/", {"sequence": ["bottle"]}, format="json")
        self.assertEqual(response.status_code, 404)

    def test_score(self):
        response = self.client.post(self.url("score/"), {"sequence": OPTIMUM}, format="json")
        self.assertEqual(response.status_code, 200)
        body = response.json()
        self.assertAlmostEqual(body["score"], -0.979, places=3)
        self.assertEqual(body["zero_pairs"], 0)
        self.assertEqual(body["satisfaction_rate"], 1.0)
        self.assertEqual(len(body["pair_terms"]), 6)

    def test_score_with_zero_pair(self):
        body = self.client.post(self.url("score/"), {"sequence": ["apples", "bottle"]}, format="json").json()
        self.assertEqual(body["score"], "-inf")
        self.assertEqual(body["zero_pairs"], 1)

    def test_score_top_first(self):
        payload = {"sequence": list(reversed(OPTIMUM)), "top_first": True}
        body = self.client.post(self.url("score/"), payload, format="json").json()
        self.assertEqual(body["sequence"], OPTIMUM)

    def test_score_unknown_label(self):
        response = self.client.post(self.url("score/"), {"sequence": ["bottle", "kiwi"]}, format="json")
        self.assertEqual(response.status_code, 400)
        self.assertEqual(response.json()["category"], "scoring")

    def test_invalid_body(self):
        response = self.client.post(self.url("score/"), {"sequence": []}, format="json")
        self.assertEqual(response.status_code, 400)
        self.assertEqual(response.json()["category"], "request")
        self.assertIn("sequence", response.json()["error"])

    def test_plan(self):
        payload = {"items": ["bananas", "bell pepper", "apples", "bottle"], "method": "exact"}
        body = self.client.post(self.url("plan/"), payload, format="json").json()
        self.assertEqual(body["sequence"], OPTIMUM)
        self.assertEqual(body["method"], "exact")
        self.assertAlmostEqual(body["score"], -0.979, places=3)

    def test_plan_is_cached(self):
        payload = {"items": ["bananas", "bottle", "apples"], "method": "local_search", "seed": 3}
        first = self.client.post(self.url("plan/"), payload, format="json").json()
        PreferenceModel.objects.filter(pk=self.model.pk).update(document={})
        second = self.client.post(self.url("plan/"), payload, format="json").json()
        self.assertEqual(first, second)

    def test_plan_duplicate_items(self):
        payload = {"items": ["bottle", "Bottle"], "method": "greedy"}
        response = self.client.post(self.url("plan/"), payload, format="json")
        self.assertEqual(response.status_code, 400)
        self.assertEqual(response.json()["category"], "label")

    def test_plan_items_resolving_to_one_class(self):
        payload = {"items": ["apple", "apples", "bottle"], "method": "exact"}
        response = self.client.post(self.url("plan/"), payload, format="json")
        self.assertEqual(response.status_code, 400)
        self.assertEqual(response.json()["category"], "label")

    def test_plan_keeps_caller_labels(self):
        payload = {"items": ["banana", "bottle (1l)"], "method": "greedy"}
        body = self.client.post(self.url("plan/"), payload, format="json").json()
        self.assertEqual(body["sequence"], ["bottle (1l)", "banana"])

    def test_plan_rejects_llm(self):
        response = self.client.post(self.url("plan/"), {"items": ["bottle"], "method": "llm"}, format="json")
        self.assertEqual(response.status_code, 400)
        self.assertEqual(response.json()["category"], "request")

    def test_read_only(self):
        response = self.client.delete(self.url())
        self.assertEqual(response.status_code, 405)


class EvaluationRunApiTests(APITestCase):
    def test_list_runs(self):
        EvaluationRun.objects.create(
            name="nightly", report={"mode": "planning"}, mode="planning", provider_kind="mock", scene_count=3,
            average_score=None, infinite_count=1, success_rate=0.5, matrix_digest="ab" * 32,
        )
        body = self.client.get("/api/runs/").json()
        self.assertEqual(len(body), 1)
        self.assertEqual(body[0]["name"], "nightly")
        self.assertIsNone(body[0]["average_score"])
        self.assertEqual(body[0]["report"], {"mode": "planning"})
