from django.urls import path
from .views import (
    EvaluationStartView, EvaluationStatusView, EvaluationResultView, EvaluationCancelView, EvaluationRemoveView,
    RunsListView, RunsStatisticsView, VerifyView, HealthCheckView,
)

urlpatterns = [
    # Evaluation endpoints
    path('evaluations/start/', EvaluationStartView.as_view(), name='evaluation-start'),
    path('evaluations/status/<uuid:run_id>/', EvaluationStatusView.as_view(), name='evaluation-status'),
    path('evaluations/result/<uuid:run_id>/', EvaluationResultView.as_view(), name='evaluation-result'),
    path('evaluations/cancel/<uuid:run_id>/', EvaluationCancelView.as_view(), name='evaluation-cancel'),
    path('evaluations/remove/<uuid:run_id>/', EvaluationRemoveView.as_view(), name='evaluation-remove'),

    # Run management
    path('runs/', RunsListView.as_view(), name='runs-list'),
    path('runs/statistics/', RunsStatisticsView.as_view(), name='runs-statistics'),

    path('verify/', VerifyView.as_view(), name='verify'),
    path('health/', HealthCheckView.as_view(), name='health-check'),
]
