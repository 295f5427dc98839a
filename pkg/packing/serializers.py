from rest_framework import serializers

from .models import EvaluationRun, PreferenceModel


def flatten_errors(detail, prefix=""):
    """Turn nested DRF error detail into ``[(dotted.path, message), ...]``."""
    if isinstance(detail, dict):
        out = []
        for key, value in detail.items():
            path = f"{prefix}.{key}" if prefix else str(key)
            out.extend(flatten_errors(value, path))
        return out
    if isinstance(detail, list):
        if all(isinstance(item, str) for item in detail):
            return [(prefix, "; ".join(str(item) for item in detail))]
        out = []
        for i, item in enumerate(detail):
            if item:
                out.extend(flatten_errors(item, f"{prefix}.{i}" if prefix else str(i)))
        return out
    return [(prefix, str(detail))]


def _matrix_field(child):
    return serializers.ListField(child=serializers.ListField(child=child), required=False)


# Document schemas


class MatrixDocumentSerializer(serializers.Serializer):
    classes = serializers.ListField(child=serializers.CharField(), min_length=1)
    alpha = serializers.FloatField(min_value=0.0)
    prob = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()))
    count = _matrix_field(serializers.IntegerField(min_value=0))
    observed = _matrix_field(serializers.BooleanField())
    legacy = serializers.BooleanField(required=False, default=False)


class ParticipantSequenceSerializer(serializers.Serializer):
    participant = serializers.CharField()
    items = serializers.ListField(child=serializers.CharField(trim_whitespace=False, allow_blank=True))


class SurveyDocumentSerializer(serializers.Serializer):
    direction = serializers.ChoiceField(choices=["top_first", "bottom_first"])
    sequences = ParticipantSequenceSerializer(many=True)


class SceneDocumentSerializer(serializers.Serializer):
    id = serializers.CharField()
    size = serializers.IntegerField(min_value=1)
    ground_truth = serializers.ListField(child=serializers.CharField(), min_length=1)
    image = serializers.CharField(required=False, allow_null=True, allow_blank=True, default=None)


class SceneSetDocumentSerializer(serializers.Serializer):
    catalog = serializers.ListField(child=serializers.CharField(), required=False, default=list)
    size_range = serializers.ListField(
        child=serializers.IntegerField(min_value=1), min_length=2, max_length=2, required=False
    )
    scenes = SceneDocumentSerializer(many=True)

    def validate_size_range(self, value):
        if value[0] > value[1]:
            raise serializers.ValidationError("min must not exceed max")
        return value


class FixtureRecordSerializer(serializers.Serializer):
    fingerprint = serializers.CharField(required=False, allow_null=True, default=None)
    response = serializers.CharField(allow_blank=True, trim_whitespace=False)


class MessageTemplateSerializer(serializers.Serializer):
    role = serializers.ChoiceField(choices=["system", "user", "assistant"])
    text = serializers.CharField(trim_whitespace=False)


class TemplateSetSerializer(serializers.Serializer):
    perception = MessageTemplateSerializer(many=True, required=False)
    planning = MessageTemplateSerializer(many=True, required=False)


# API


class PreferenceModelSerializer(serializers.ModelSerializer):
    classes = serializers.SerializerMethodField()

    class Meta:
        model = PreferenceModel
        fields = ["id", "name", "digest", "class_count", "alpha", "classes", "created_at"]

    def get_classes(self, obj):
        return obj.document.get("classes", [])


class EvaluationRunSerializer(serializers.ModelSerializer):
    class Meta:
        model = EvaluationRun
        fields = [
            "id",
            "name",
            "mode",
            "provider_kind",
            "scene_count",
            "average_score",
            "infinite_count",
            "success_rate",
            "matrix_digest",
            "created_at",
            "report",
        ]


class ScoreRequestSerializer(serializers.Serializer):
    sequence = serializers.ListField(child=serializers.CharField(), min_length=1)
    top_first = serializers.BooleanField(required=False, default=False)


class PlanRequestSerializer(serializers.Serializer):
    items = serializers.ListField(child=serializers.CharField(), min_length=1)
    method = serializers.ChoiceField(choices=["exact", "greedy", "local_search", "random"], default="local_search")
    seed = serializers.IntegerField(required=False, default=0)
