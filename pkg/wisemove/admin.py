from django.contrib import admin

from .models import EvaluationRun, TrialResult


class TrialResultInline(admin.TabularInline):
    model = TrialResult
    extra = 0


@admin.register(EvaluationRun)
class EvaluationRunAdmin(admin.ModelAdmin):
    list_display = ['run_id', 'planner', 'status', 'seed', 'created_at']
    list_filter = ['status', 'planner']
    inlines = [TrialResultInline]
