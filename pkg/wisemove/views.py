import logging

from django.conf import settings
from django.core.paginator import Paginator
from django.utils import timezone
from drf_spectacular.types import OpenApiTypes
from drf_spectacular.utils import OpenApiExample, OpenApiParameter, extend_schema
from rest_framework import status
from rest_framework.response import Response
from rest_framework.views import APIView

from .exceptions import ConfigurationError, LtlError, MissingAtomError
from .ltl import locate_violation, parse
from .models import EvaluationRun
from .options import OptionId
from .planner import PlannerMode
from .serializers import (
    EvaluationResultSerializer,
    EvaluationRunSerializer,
    EvaluationStartSerializer,
    HealthSerializer,
    RunStatisticsSerializer,
    VerifyRequestSerializer,
    VerifyResponseSerializer,
    load_run_config,
)
from .services import EvaluationService

logger = logging.getLogger(__name__)

RUN_ID_EXAMPLE = '123e4567-e89b-12d3-a456-426614174000'


def _pagination(request):
    """(page, page_size) from the query string; raises ValueError on garbage."""
    page = int(request.GET.get('page', 1))
    page_size = int(request.GET.get('page_size', 20))
    if page_size < 1:
        raise ValueError(page_size)
    return page, page_size


class EvaluationStartView(APIView):
    """Create an evaluation run"""

    @extend_schema(
        summary="Start Evaluation",
        description="Validate a run configuration and queue an evaluation of the chosen planner over its trials.",
        request=EvaluationStartSerializer,
        responses={
            202: OpenApiExample(
                'Success',
                value={'run_id': RUN_ID_EXAMPLE, 'status': 'pending', 'message': 'Evaluation run created'}
            ),
            400: OpenApiExample('Bad Request', value={'error': 'Invalid configuration', 'details': ['episodes: Ensure this value is greater than or equal to 1.']}),
            500: OpenApiExample('Server Error', value={'error': 'Failed to start evaluation'})
        },
        tags=['Evaluation']
    )
    def post(self, request):
        serializer = EvaluationStartSerializer(data=request.data)
        if not serializer.is_valid():
            return Response(serializer.errors, status=status.HTTP_400_BAD_REQUEST)

        data = serializer.validated_data
        try:
            run = EvaluationService.start_evaluation(data.get('config'), data.get('planner'), data.get('seed'))
        except ConfigurationError as e:
            return Response({'error': 'Invalid configuration', 'details': e.errors}, status=status.HTTP_400_BAD_REQUEST)
        except Exception as e:
            logger.exception("Could not create evaluation run")
            return Response({'error': f'Failed to start evaluation: {e}'}, status=status.HTTP_500_INTERNAL_SERVER_ERROR)
        return Response(
            {'run_id': str(run.run_id), 'status': run.status, 'message': 'Evaluation run created'},
            status=status.HTTP_202_ACCEPTED
        )


class EvaluationStatusView(APIView):

    @extend_schema(
        summary="Get Run Status",
        description="Current status of an evaluation run.",
        responses={
            200: EvaluationRunSerializer,
            404: OpenApiExample('Not Found', value={'error': 'Run not found'})
        },
        tags=['Evaluation']
    )
    def get(self, request, run_id):
        try:
            run = EvaluationRun.objects.get(run_id=run_id)
        except EvaluationRun.DoesNotExist:
            return Response({'error': 'Run not found'}, status=status.HTTP_404_NOT_FOUND)
        return Response(EvaluationRunSerializer(run).data, status=status.HTTP_200_OK)


class EvaluationResultView(APIView):
    """Per-trial outcome percentages with their mean and standard deviation"""

    @extend_schema(
        summary="Get Evaluation Results",
        description="Outcome percentages of a completed run: one row per trial plus the summary over trials.",
        responses={
            200: OpenApiExample(
                'Success',
                value={
                    'run_id': RUN_ID_EXAMPLE,
                    'status': 'completed',
                    'planner': 'manual',
                    'seed': 0,
                    'episode_count': 1000,
                    'summary': {
                        'mean': {'success_pct': 99.5, 'violation_pct': 0.3, 'collision_pct': 0.2, 'timeout_pct': 0.0},
                        'std': {'success_pct': 0.5, 'violation_pct': 0.4, 'collision_pct': 0.4, 'timeout_pct': 0.0},
                    },
                    'trials': [
                        {'trial': 0, 'success_pct': 99.0, 'violation_pct': 1.0, 'collision_pct': 0.0, 'timeout_pct': 0.0}
                    ]
                }
            ),
            404: OpenApiExample('Not Found', value={'error': 'Run not found'}),
            409: OpenApiExample('Conflict', value={'error': 'Run is not completed. Current status: pending'})
        },
        tags=['Evaluation']
    )
    def get(self, request, run_id):
        try:
            run = EvaluationRun.objects.get(run_id=run_id)
        except EvaluationRun.DoesNotExist:
            return Response({'error': 'Run not found'}, status=status.HTTP_404_NOT_FOUND)
        if run.status != 'completed':
            return Response(
                {'error': f'Run is not completed. Current status: {run.status}'},
                status=status.HTTP_409_CONFLICT
            )
        return Response(EvaluationResultSerializer(run).data, status=status.HTTP_200_OK)


class EvaluationCancelView(APIView):

    @extend_schema(
        summary="Cancel Run",
        description="Cancel a pending or in-progress run. Finished runs cannot be cancelled.",
        responses={
            200: OpenApiExample('Success', value={'message': 'Run cancelled successfully', 'run_id': RUN_ID_EXAMPLE}),
            404: OpenApiExample('Not Found', value={'error': 'Run not found'}),
            409: OpenApiExample('Conflict', value={'error': 'Run cannot be cancelled. Current status: completed'})
        },
        tags=['Evaluation']
    )
    def post(self, request, run_id):
        try:
            run = EvaluationRun.objects.get(run_id=run_id)
        except EvaluationRun.DoesNotExist:
            return Response({'error': 'Run not found'}, status=status.HTTP_404_NOT_FOUND)
        if not run.can_be_cancelled():
            return Response(
                {'error': f'Run cannot be cancelled. Current status: {run.status}'},
                status=status.HTTP_409_CONFLICT
            )
        if EvaluationService.cancel_run(run_id):
            return Response({'message': 'Run cancelled successfully', 'run_id': str(run_id)}, status=status.HTTP_200_OK)
        return Response({'error': 'Failed to cancel run'}, status=status.HTTP_500_INTERNAL_SERVER_ERROR)


class EvaluationRemoveView(APIView):

    @extend_schema(
        summary="Remove Run",
        description="Delete a run and its stored trial results. This action is irreversible.",
        responses={
            200: OpenApiExample('Success', value={'message': 'Run removed successfully'}),
            404: OpenApiExample('Not Found', value={'error': 'Run not found'})
        },
        tags=['Evaluation']
    )
    def delete(self, request, run_id):
        if EvaluationService.remove_run(run_id):
            return Response({'message': 'Run removed successfully'}, status=status.HTTP_200_OK)
        return Response({'error': 'Run not found'}, status=status.HTTP_404_NOT_FOUND)


class RunsListView(APIView):
    """All evaluation runs, newest first"""

    @extend_schema(
        summary="List Runs",
        description="Evaluation runs with optional status filtering and pagination.",
        parameters=[
            OpenApiParameter(
                name='status',
                type=OpenApiTypes.STR,
                location=OpenApiParameter.QUERY,
                description='Filter by status (pending, in_progress, completed, failed, cancelled)'
            ),
            OpenApiParameter(
                name='page',
                type=OpenApiTypes.INT,
                location=OpenApiParameter.QUERY,
                description='Page number (default: 1)'
            ),
            OpenApiParameter(
                name='page_size',
                type=OpenApiTypes.INT,
                location=OpenApiParameter.QUERY,
                description='Runs per page (default: 20)'
            )
        ],
        responses={
            200: OpenApiExample(
                'Success',
                value={
                    'page': 1,
                    'page_size': 20,
                    'total_pages': 1,
                    'total_runs': 2,
                    'has_next': False,
                    'has_previous': False,
                    'results': [{'run_id': RUN_ID_EXAMPLE, 'status': 'completed', 'planner': 'mcts', 'seed': 0}]
                }
            )
        },
        tags=['Run Management']
    )
    def get(self, request):
        try:
            page, page_size = _pagination(request)
        except ValueError:
            return Response({'error': 'Invalid pagination parameters'}, status=status.HTTP_400_BAD_REQUEST)

        queryset = EvaluationRun.objects.all()
        status_filter = request.GET.get('status')
        if status_filter:
            queryset = queryset.filter(status=status_filter)

        paginator = Paginator(queryset, page_size)
        page_obj = paginator.get_page(page)
        return Response({
            'page': page_obj.number,
            'page_size': page_size,
            'total_pages': paginator.num_pages,
            'total_runs': paginator.count,
            'has_next': page_obj.has_next(),
            'has_previous': page_obj.has_previous(),
            'results': EvaluationRunSerializer(page_obj, many=True).data
        }, status=status.HTTP_200_OK)


class RunsStatisticsView(APIView):

    @extend_schema(
        summary="Get Run Statistics",
        description="Counts by status, average duration, episodes simulated and mean success per planner.",
        responses={200: RunStatisticsSerializer},
        tags=['Run Management']
    )
    def get(self, request):
        stats = EvaluationService.get_run_statistics()
        return Response(RunStatisticsSerializer(stats).data, status=status.HTTP_200_OK)


class VerifyView(APIView):
    """Check a temporal property against a finite trace of valuations"""

    @extend_schema(
        summary="Verify Property",
        description="Run a temporal-logic monitor over the given valuations and report the verdict "
                    "and the index of the first falsifying step.",
        request=VerifyRequestSerializer,
        responses={
            200: VerifyResponseSerializer,
            400: OpenApiExample('Bad Request', value={'error': "Unknown proposition 'in_box'"})
        },
        tags=['Verification']
    )
    def post(self, request):
        serializer = VerifyRequestSerializer(data=request.data)
        if not serializer.is_valid():
            return Response(serializer.errors, status=status.HTTP_400_BAD_REQUEST)

        trace = serializer.validated_data['trace']
        try:
            formula = parse(serializer.validated_data['property'])
            verdict, index = locate_violation(formula, trace)
        except MissingAtomError as e:
            return Response({'error': f'Unknown proposition {e.name!r}'}, status=status.HTTP_400_BAD_REQUEST)
        except LtlError as e:
            return Response({'error': str(e)}, status=status.HTTP_400_BAD_REQUEST)

        result = {'verdict': verdict.value, 'violation_index': index, 'steps': len(trace)}
        return Response(VerifyResponseSerializer(result).data, status=status.HTTP_200_OK)


class HealthCheckView(APIView):
    """Planners and options on offer, whether the default configuration loads, and the runs in flight"""

    @extend_schema(
        summary="Health Check",
        description="Reports \"degraded\" when the default run configuration cannot be loaded.",
        responses={200: HealthSerializer},
        tags=['System']
    )
    def get(self, request):
        path = settings.WISEMOVE.get('DEFAULT_CONFIG')
        errors = None if path else {'config': ['No default configuration is set.']}
        try:
            if path:
                load_run_config(path)
        except ConfigurationError as e:
            errors = e.errors
            logger.warning("Default configuration %s does not load: %s", path, errors)
        health_data = {
            'status': 'ok' if errors is None else 'degraded',
            'timestamp': timezone.now(),
            'planners': PlannerMode.values,
            'options': OptionId.values,
            'default_config': str(path),
            'config_errors': errors,
            'active_runs': EvaluationRun.objects.filter(status__in=['pending', 'in_progress']).count(),
        }
        return Response(HealthSerializer(health_data).data, status=status.HTTP_200_OK)
