import logging
from typing import Any, Dict, Mapping

from django.conf import settings
from django.db.models import Avg, Sum
from django.utils import timezone

from .exceptions import WisemoveError
from .harness import evaluate
from .models import EvaluationRun, TrialResult
from .serializers import build_run_config, run_config_to_data

logger = logging.getLogger(__name__)


class EvaluationService:
    """Evaluation runs as persisted jobs"""

    @staticmethod
    def start_evaluation(config: Mapping[str, Any] = None, planner: str = None, seed: int = None) -> EvaluationRun:
        """
        Validate the configuration and record a pending run.  Raises
        ConfigurationError before anything is stored.
        """
        defaults = getattr(settings, "WISEMOVE", {})
        cfg = build_run_config(config or {})
        workers = None if "workers" in (config or {}) else defaults.get("DEFAULT_WORKERS")
        cfg = cfg.with_overrides(seed=seed, planner=planner, workers=workers)
        run = EvaluationRun.objects.create(
            status='pending',
            planner=cfg.planner,
            seed=cfg.seed,
            config=run_config_to_data(cfg),
        )
        logger.info("Evaluation run %s created (%s, seed %d)", run.run_id, run.planner, run.seed)
        # a task queue would pick the run up here; until then runs are processed explicitly
        return run

    @staticmethod
    def process_evaluation(run_id) -> bool:
        """Run a pending evaluation to completion and store its per-trial results"""
        try:
            run = EvaluationRun.objects.get(run_id=run_id)
        except EvaluationRun.DoesNotExist:
            return False
        if run.status != 'pending':
            return False

        run.status = 'in_progress'
        run.start_time = timezone.now()
        run.save()
        logger.info("Evaluation run %s started", run.run_id)

        try:
            cfg = build_run_config(run.config)
            metrics = evaluate(cfg, write=False)
            TrialResult.objects.bulk_create([
                TrialResult(
                    run=run,
                    trial=row.trial,
                    success_pct=row.success_pct,
                    violation_pct=row.violation_pct,
                    collision_pct=row.collision_pct,
                    timeout_pct=row.timeout_pct,
                )
                for row in metrics.trials
            ])
            run.refresh_from_db(fields=['status'])
            if run.status == 'cancelled':
                logger.info("Evaluation run %s was cancelled while running", run.run_id)
                return True
            run.status = 'completed'
            run.summary = {"mean": metrics.mean, "std": metrics.std}
            run.episode_count = len(metrics.outcomes)
            run.end_time = timezone.now()
            run.save()
            logger.info("Evaluation run %s completed", run.run_id)
        except WisemoveError as e:
            logger.error("Evaluation run %s failed", run.run_id, exc_info=True)
            run.status = 'failed'
            run.error_message = str(e)
            run.end_time = timezone.now()
            run.save()
        except Exception as e:
            logger.error("Evaluation run %s failed unexpectedly", run.run_id, exc_info=True)
            run.status = 'failed'
            run.error_message = f"Unexpected error: {e}"
            run.end_time = timezone.now()
            run.save()
        return True

    @staticmethod
    def cancel_run(run_id) -> bool:
        try:
            run = EvaluationRun.objects.get(run_id=run_id)
        except EvaluationRun.DoesNotExist:
            return False
        if not run.can_be_cancelled():
            return False
        run.status = 'cancelled'
        run.end_time = timezone.now()
        run.save()
        logger.info("Evaluation run %s cancelled", run.run_id)
        return True

    @staticmethod
    def remove_run(run_id) -> bool:
        try:
            run = EvaluationRun.objects.get(run_id=run_id)
        except EvaluationRun.DoesNotExist:
            return False
        run.trials.all().delete()
        run.delete()
        return True

    @staticmethod
    def get_run_statistics() -> Dict[str, Any]:
        counts = {
            state: EvaluationRun.objects.filter(status=state).count()
            for state, _ in EvaluationRun.STATUS_CHOICES
        }
        durations = [
            run.duration_seconds()
            for run in EvaluationRun.objects.filter(status='completed', start_time__isnull=False, end_time__isnull=False)
        ]
        mean_success = {}
        for planner, _ in EvaluationRun.PLANNER_CHOICES:
            value = TrialResult.objects.filter(run__planner=planner, run__status='completed').aggregate(
                mean=Avg('success_pct'))['mean']
            if value is not None:
                mean_success[planner] = value
        return {
            'total_runs': EvaluationRun.objects.count(),
            'completed_runs': counts['completed'],
            'failed_runs': counts['failed'],
            'pending_runs': counts['pending'],
            'in_progress_runs': counts['in_progress'],
            'cancelled_runs': counts['cancelled'],
            'average_duration_seconds': sum(durations) / len(durations) if durations else 0,
            'total_episodes': EvaluationRun.objects.aggregate(total=Sum('episode_count'))['total'] or 0,
            'mean_success_pct': mean_success,
        }

    @staticmethod
    def process_evaluation_manually(run_id) -> bool:
        """Process a pending run in the calling thread (management command and tests)"""
        try:
            return EvaluationService.process_evaluation(run_id)
        except Exception:
            logger.exception("Processing of run %s aborted", run_id)
            return False
