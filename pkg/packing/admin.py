from django.contrib import admin
from .models import EvaluationRun, PreferenceModel

@admin.register(PreferenceModel)
class PreferenceModelAdmin(admin.ModelAdmin):
    list_display = ("name", "class_count", "alpha", "digest", "created_at")
    search_fields = ("name", "digest")
    list_filter = ("created_at",)

@admin.register(EvaluationRun)
class EvaluationRunAdmin(admin.ModelAdmin):
    list_display = ("name", "mode", "provider_kind", "scene_count", "average_score", "success_rate", "created_at")
    search_fields = ("name", "matrix_digest")
    list_filter = ("mode", "provider_kind", "created_at")
