import uuid
from django.db import models
from django.utils import timezone


class EvaluationRun(models.Model):
    STATUS_CHOICES = [
        ("pending", "Pending"),
        ("in_progress", "In Progress"),
        ("completed", "Completed"),
        ("failed", "Failed"),
        ("cancelled", "Cancelled"),
    ]
    PLANNER_CHOICES = [
        ("manual", "Manual options graph"),
        ("mcts", "Monte Carlo tree search"),
    ]

    run_id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default="pending")
    planner = models.CharField(max_length=10, choices=PLANNER_CHOICES, default="manual")
    seed = models.BigIntegerField(default=0)
    config = models.JSONField(default=dict, blank=True)
    summary = models.JSONField(null=True, blank=True)
    error_message = models.TextField(blank=True)
    episode_count = models.IntegerField(default=0)
    start_time = models.DateTimeField(null=True, blank=True)
    end_time = models.DateTimeField(null=True, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"Run {self.run_id} ({self.planner}) - {self.status}"

    def duration_seconds(self):
        if self.start_time and self.end_time:
            return (self.end_time - self.start_time).total_seconds()
        elif self.start_time:
            return (timezone.now() - self.start_time).total_seconds()
        return 0

    def can_be_cancelled(self):
        return self.status in ['pending', 'in_progress']


class TrialResult(models.Model):
    """Outcome percentages of one trial of an evaluation run"""
    run = models.ForeignKey(EvaluationRun, on_delete=models.CASCADE, related_name='trials')
    trial = models.IntegerField()
    success_pct = models.FloatField(default=0.0)
    violation_pct = models.FloatField(default=0.0)
    collision_pct = models.FloatField(default=0.0)
    timeout_pct = models.FloatField(default=0.0)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['trial']
        unique_together = ['run', 'trial']

    def __str__(self):
        return f"Trial {self.trial} of run {self.run.run_id}"
