from rest_framework.routers import SimpleRouter
from .views import EvaluationRunViewSet, PreferenceModelViewSet

router = SimpleRouter()
router.register('models', PreferenceModelViewSet)
router.register('runs', EvaluationRunViewSet)
urlpatterns = router.urls
