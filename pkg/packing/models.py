from django.db import models


class PreferenceModel(models.Model):
    name = models.CharField(max_length=255, unique=True)
    document = models.JSONField(default=dict)
    digest = models.CharField(max_length=64)
    class_count = models.IntegerField()
    alpha = models.FloatField(default=0.0)
    created_at = models.DateTimeField(auto_now_add=True)

    def to_matrix(self):
        from .preference import deserialize_matrix

        return deserialize_matrix(self.document)

    def __str__(self):
        return f"PreferenceModel({self.name}, {self.class_count} classes)"


class EvaluationRun(models.Model):
    name = models.CharField(max_length=255)
    report = models.JSONField(default=dict)
    mode = models.CharField(max_length=20)
    provider_kind = models.CharField(max_length=20)
    scene_count = models.IntegerField()
    # None when no scene produced a plan; -inf stored as null with infinite_count > 0
    average_score = models.FloatField(null=True, blank=True)
    infinite_count = models.IntegerField(default=0)
    success_rate = models.FloatField()
    matrix_digest = models.CharField(max_length=64)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        indexes = [models.Index(fields=['name', 'created_at'], name='packing_eva_name_9c1d2e_idx')]

    def __str__(self):
        return f"EvaluationRun({self.name}, {self.scene_count} scenes)"
