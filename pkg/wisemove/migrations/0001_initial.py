# Generated by Django 5.2.4 on 2026-10-17 09:12

import django.db.models.deletion
import uuid
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="EvaluationRun",
            fields=[
                (
                    "run_id",
                    models.UUIDField(
                        default=uuid.uuid4,
                        editable=False,
                        primary_key=True,
                        serialize=False,
                    ),
                ),
                (
                    "status",
                    models.CharField(
                        choices=[
                            ("pending", "Pending"),
                            ("in_progress", "In Progress"),
                            ("completed", "Completed"),
                            ("failed", "Failed"),
                            ("cancelled", "Cancelled"),
                        ],
                        default="pending",
                        max_length=20,
                    ),
                ),
                (
                    "planner",
                    models.CharField(
                        choices=[
                            ("manual", "Manual options graph"),
                            ("mcts", "Monte Carlo tree search"),
                        ],
                        default="manual",
                        max_length=10,
                    ),
                ),
                ("seed", models.BigIntegerField(default=0)),
                ("config", models.JSONField(blank=True, default=dict)),
                ("summary", models.JSONField(blank=True, null=True)),
                ("error_message", models.TextField(blank=True)),
                ("episode_count", models.IntegerField(default=0)),
                ("start_time", models.DateTimeField(blank=True, null=True)),
                ("end_time", models.DateTimeField(blank=True, null=True)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
                ("updated_at", models.DateTimeField(auto_now=True)),
            ],
            options={
                "ordering": ["-created_at"],
            },
        ),
        migrations.CreateModel(
            name="TrialResult",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("trial", models.IntegerField()),
                ("success_pct", models.FloatField(default=0.0)),
                ("violation_pct", models.FloatField(default=0.0)),
                ("collision_pct", models.FloatField(default=0.0)),
                ("timeout_pct", models.FloatField(default=0.0)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="trials",
                        to="wisemove.evaluationrun",
                    ),
                ),
            ],
            options={
                "ordering": ["trial"],
                "unique_together": {("run", "trial")},
            },
        ),
    ]
