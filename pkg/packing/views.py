import hashlib
import logging

from django.core.cache import cache
from rest_framework import viewsets
from rest_framework.decorators import action
from rest_framework.response import Response

from .conf import PlannerLimits
from .exceptions import PackingError, ScoringError
from .models import EvaluationRun, PreferenceModel
from .planner import PlanRequest, plan
from .scoring import PackingSequence, constraint_satisfaction_rate, encode_extended, score
from .serializers import (
    EvaluationRunSerializer,
    PlanRequestSerializer,
    PreferenceModelSerializer,
    ScoreRequestSerializer,
)

logger = logging.getLogger(__name__)

PLAN_CACHE_TIMEOUT = 60 * 15


def _error(exc):
    return Response({"error": str(exc), "category": exc.category}, status=400)


def _satisfaction(sequence, matrix):
    try:
        return constraint_satisfaction_rate(sequence, matrix)
    except ScoringError:
        return None


def _score_document(sequence, matrix):
    consistency = score(sequence, matrix)
    return {
        "sequence": list(sequence.items),
        "score": encode_extended(consistency.value),
        "zero_pairs": consistency.zero_pairs,
        "satisfaction_rate": _satisfaction(sequence, matrix),
        "pair_terms": [
            {
                "lower": t.lower,
                "upper": t.upper,
                "p": t.p,
                "q": t.q,
                "probability": t.probability,
                "log_prob": encode_extended(t.log_prob),
            }
            for t in consistency.pair_terms
        ],
    }


class PreferenceModelViewSet(viewsets.ReadOnlyModelViewSet):
    queryset = PreferenceModel.objects.order_by("-created_at")
    serializer_class = PreferenceModelSerializer

    @action(detail=True, methods=["post"])
    def score(self, request, pk=None):
        model = self.get_object()
        body = ScoreRequestSerializer(data=request.data)
        if not body.is_valid():
            return Response({"error": body.errors, "category": "request"}, status=400)
        try:
            matrix = model.to_matrix()
            sequence = PackingSequence.from_labels(
                body.validated_data["sequence"], top_first=body.validated_data["top_first"]
            )
            return Response(_score_document(sequence, matrix))
        except PackingError as exc:
            return _error(exc)

    @action(detail=True, methods=["post"])
    def plan(self, request, pk=None):
        model = self.get_object()
        body = PlanRequestSerializer(data=request.data)
        if not body.is_valid():
            return Response({"error": body.errors, "category": "request"}, status=400)
        data = body.validated_data

        items_key = hashlib.sha256("\n".join(data["items"]).encode("utf-8")).hexdigest()[:16]
        cache_key = f'plan_{model.digest[:16]}_{data["method"]}_{data["seed"]}_{items_key}'
        cached = cache.get(cache_key)
        if cached is not None:
            return Response(cached)

        try:
            matrix = model.to_matrix()
            plan_request = PlanRequest(tuple(data["items"]), data["method"], data["seed"], PlannerLimits())
            sequence = plan(plan_request, matrix)
            result = {"method": data["method"], "seed": data["seed"], **_score_document(sequence, matrix)}
        except PackingError as exc:
            return _error(exc)
        logger.info(f"Planned {len(sequence)} items for model {model.name} with {data['method']}")
        cache.set(cache_key, result, PLAN_CACHE_TIMEOUT)
        return Response(result)


class EvaluationRunViewSet(viewsets.ReadOnlyModelViewSet):
    queryset = EvaluationRun.objects.order_by("-created_at")
    serializer_class = EvaluationRunSerializer
