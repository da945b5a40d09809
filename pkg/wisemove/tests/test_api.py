import uuid
from django.test import TestCase, override_settings
from django.urls import reverse
from django.utils import timezone
from rest_framework.test import APITestCase
from rest_framework import status
from wisemove.models import EvaluationRun, TrialResult
from wisemove.services import EvaluationService

TINY_CONFIG = {
    'episodes': 2,
    'trials': 2,
    'max_episode_steps': 80,
    'scenario': {'max_non_ego': 2},
}


class SeededDataTestCase(APITestCase):
    """
    Test cases using seeded runs for controlled, fast, and isolated testing.
    These tests validate the API logic without simulating any episode.
    """

    def setUp(self):
        """Set up seeded test data"""
        self.completed_run = EvaluationRun.objects.create(
            status='completed',
            planner='manual',
            seed=1,
            episode_count=4,
            summary={'mean': {'success_pct': 75.0}, 'std': {'success_pct': 35.36}},
            start_time=timezone.now() - timezone.timedelta(hours=1),
            end_time=timezone.now() - timezone.timedelta(minutes=30)
        )

        self.pending_run = EvaluationRun.objects.create(status='pending', planner='mcts', seed=2)

        self.cancelled_run = EvaluationRun.objects.create(
            status='cancelled',
            planner='manual',
            start_time=timezone.now() - timezone.timedelta(hours=2),
            end_time=timezone.now() - timezone.timedelta(hours=1, minutes=30)
        )

        self.failed_run = EvaluationRun.objects.create(
            status='failed',
            planner='manual',
            error_message='could not place non-ego vehicle 3 of 6 within 100 attempts',
            start_time=timezone.now() - timezone.timedelta(hours=1),
            end_time=timezone.now() - timezone.timedelta(minutes=55)
        )

        # per-trial rows for the completed run
        for trial, success in enumerate((50.0, 100.0)):
            TrialResult.objects.create(
                run=self.completed_run,
                trial=trial,
                success_pct=success,
                collision_pct=100.0 - success,
            )

    def test_run_status_endpoint(self):
        """Test the run status endpoint with seeded data"""
        url = reverse('evaluation-status', kwargs={'run_id': self.completed_run.run_id})
        response = self.client.get(url)

        self.assertEqual(response.status_code, status.HTTP_200_OK)
        data = response.json()
        self.assertEqual(data['status'], 'completed')
        self.assertEqual(data['episode_count'], 4)
        self.assertAlmostEqual(data['duration_seconds'], 1800.0, delta=1.0)

    def test_run_result_endpoint(self):
        """Test fetching per-trial results for a completed run"""
        url = reverse('evaluation-result', kwargs={'run_id': self.completed_run.run_id})
        response = self.client.get(url)

        self.assertEqual(response.status_code, status.HTTP_200_OK)
        data = response.json()
        self.assertEqual(len(data['trials']), 2)
        self.assertEqual(data['trials'][1]['success_pct'], 100.0)
        self.assertEqual(data['summary']['mean']['success_pct'], 75.0)

    def test_result_of_unfinished_run(self):
        """Test results are refused while a run is not completed"""
        url = reverse('evaluation-result', kwargs={'run_id': self.pending_run.run_id})
        response = self.client.get(url)

        self.assertEqual(response.status_code, status.HTTP_409_CONFLICT)
        self.assertIn('pending', response.json()['error'])

    def test_unknown_run(self):
        """Test a random run id is reported as missing"""
        url = reverse('evaluation-status', kwargs={'run_id': uuid.uuid4()})
        response = self.client.get(url)

        self.assertEqual(response.status_code, status.HTTP_404_NOT_FOUND)
        self.assertEqual(response.json()['error'], 'Run not found')

    def test_runs_list_endpoint(self):
        """Test listing all runs"""
        url = reverse('runs-list')
        response = self.client.get(url)

        self.assertEqual(response.status_code, status.HTTP_200_OK)
        data = response.json()
        self.assertEqual(data['total_runs'], 4)  # We created 4 runs in setUp
        self.assertEqual(len(data['results']), 4)
        self.assertFalse(data['has_next'])

    def test_runs_list_filter_and_pagination(self):
        """Test the status filter and page parameters"""
        url = reverse('runs-list')
        response = self.client.get(url, {'status': 'failed'})
        self.assertEqual(response.json()['total_runs'], 1)

        response = self.client.get(url, {'page': 2, 'page_size': 3})
        data = response.json()
        self.assertEqual(data['page'], 2)
        self.assertEqual(data['total_pages'], 2)
        self.assertEqual(len(data['results']), 1)
        self.assertTrue(data['has_previous'])

        response = self.client.get(url, {'page': 'first'})
        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)

    def test_run_statistics_endpoint(self):
        """Test run statistics endpoint"""
        url = reverse('runs-statistics')
        response = self.client.get(url)

        self.assertEqual(response.status_code, status.HTTP_200_OK)
        data = response.json()
        self.assertEqual(data['total_runs'], 4)
        self.assertEqual(data['completed_runs'], 1)
        self.assertEqual(data['failed_runs'], 1)
        self.assertEqual(data['pending_runs'], 1)
        self.assertEqual(data['cancelled_runs'], 1)
        self.assertEqual(data['total_episodes'], 4)
        self.assertEqual(data['mean_success_pct'], {'manual': 75.0})

    def test_health_check_endpoint(self):
        """Test health check endpoint"""
        url = reverse('health-check')
        response = self.client.get(url)

        self.assertEqual(response.status_code, status.HTTP_200_OK)
        data = response.json()
        self.assertEqual(data['status'], 'ok')
        self.assertIn('timestamp', data)
        self.assertEqual(data['planners'], ['manual', 'mcts'])
        self.assertEqual(data['options'], ['KeepLane', 'Stop', 'Wait', 'Follow', 'ChangeLane'])
        self.assertTrue(data['default_config'].endswith('default.json'))
        self.assertIsNone(data['config_errors'])
        self.assertEqual(data['active_runs'], 1)

    def test_health_check_reports_unloadable_default_config(self):
        """Test a missing default configuration degrades the health check"""
        with override_settings(WISEMOVE={'DEFAULT_CONFIG': '/nonexistent/wisemove.json'}):
            response = self.client.get(reverse('health-check'))

        self.assertEqual(response.status_code, status.HTTP_200_OK)
        data = response.json()
        self.assertEqual(data['status'], 'degraded')
        self.assertIn('config', data['config_errors'])

    def test_cancel_pending_run(self):
        """Test cancelling a pending run"""
        url = reverse('evaluation-cancel', kwargs={'run_id': self.pending_run.run_id})
        response = self.client.post(url)

        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertIn('cancelled successfully', response.json()['message'])

        # Verify run status was updated
        self.pending_run.refresh_from_db()
        self.assertEqual(self.pending_run.status, 'cancelled')

    def test_cancel_finished_run(self):
        """Test a completed run cannot be cancelled"""
        url = reverse('evaluation-cancel', kwargs={'run_id': self.completed_run.run_id})
        response = self.client.post(url)

        self.assertEqual(response.status_code, status.HTTP_409_CONFLICT)

    def test_remove_run(self):
        """Test removing a run and its trial rows"""
        run_id = self.completed_run.run_id
        url = reverse('evaluation-remove', kwargs={'run_id': run_id})
        response = self.client.delete(url)

        self.assertEqual(response.status_code, status.HTTP_200_OK)

        # Verify run was deleted together with its trials
        with self.assertRaises(EvaluationRun.DoesNotExist):
            EvaluationRun.objects.get(run_id=run_id)
        self.assertFalse(TrialResult.objects.filter(run_id=run_id).exists())

        response = self.client.delete(url)
        self.assertEqual(response.status_code, status.HTTP_404_NOT_FOUND)


class EvaluationStartTestCase(APITestCase):
    """
    Test cases for creating runs through the API.
    """

    def test_start_new_evaluation(self):
        """Test starting a new evaluation run"""
        url = reverse('evaluation-start')
        response = self.client.post(url, {'config': TINY_CONFIG, 'seed': 12}, format='json')

        self.assertEqual(response.status_code, status.HTTP_202_ACCEPTED)
        data = response.json()
        self.assertEqual(data['status'], 'pending')

        # Verify run was created with the resolved configuration
        run = EvaluationRun.objects.get(run_id=data['run_id'])
        self.assertEqual(run.seed, 12)
        self.assertEqual(run.config['episodes'], 2)
        self.assertEqual(run.config['scenario']['max_non_ego'], 2)

    def test_planner_override(self):
        """Test the planner field overrides the configuration"""
        url = reverse('evaluation-start')
        response = self.client.post(url, {'config': TINY_CONFIG, 'planner': 'mcts'}, format='json')

        self.assertEqual(response.status_code, status.HTTP_202_ACCEPTED)
        run = EvaluationRun.objects.get(run_id=response.json()['run_id'])
        self.assertEqual(run.planner, 'mcts')
        self.assertEqual(run.config['planner']['mode'], 'mcts')

    def test_invalid_configuration(self):
        """Test unknown keys are rejected before a run is stored"""
        url = reverse('evaluation-start')
        response = self.client.post(url, {'config': {'episodes': 2, 'lanes': 3}}, format='json')

        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)
        data = response.json()
        self.assertEqual(data['error'], 'Invalid configuration')
        self.assertIn('lanes', data['details'])
        self.assertEqual(EvaluationRun.objects.count(), 0)

    def test_rl_planner_rejected(self):
        """Test the learned-policy planner mode is refused"""
        url = reverse('evaluation-start')
        response = self.client.post(url, {'config': {'planner': {'mode': 'rl'}}}, format='json')

        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)
        self.assertIn('planner', response.json()['details'])


class VerifyTestCase(APITestCase):
    """
    Test cases for offline property checking of valuation traces.
    """

    def test_violation_located(self):
        """Test a rolling stop is reported with its first falsifying step"""
        url = reverse('verify')
        trace = [
            {'in_stop_region': False, 'has_stopped_in_stop_region': False},
            {'in_stop_region': True, 'has_stopped_in_stop_region': False},
            {'in_stop_region': False, 'has_stopped_in_stop_region': False},
        ]
        payload = {
            'property': 'G(in_stop_region => (in_stop_region U has_stopped_in_stop_region))',
            'trace': trace,
        }
        response = self.client.post(url, payload, format='json')

        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.json(), {'verdict': 'violated', 'violation_index': 2, 'steps': 3})

    def test_safety_on_clean_prefix(self):
        """Test a safety property over a clean finite prefix stays undetermined"""
        url = reverse('verify')
        payload = {'property': 'G(not over_speed_limit)', 'trace': [{'over_speed_limit': False}] * 4}
        response = self.client.post(url, payload, format='json')

        self.assertEqual(response.json()['verdict'], 'undetermined')
        self.assertIsNone(response.json()['violation_index'])

    def test_syntax_error(self):
        """Test malformed properties are rejected"""
        url = reverse('verify')
        response = self.client.post(url, {'property': 'G(a and )', 'trace': [{'a': True}]}, format='json')

        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)
        self.assertIn('error', response.json())

    def test_unknown_proposition(self):
        """Test a property naming a proposition missing from the trace"""
        url = reverse('verify')
        response = self.client.post(url, {'property': 'G(b)', 'trace': [{'a': True}]}, format='json')

        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)
        self.assertEqual(response.json()['error'], "Unknown proposition 'b'")


class EvaluationServiceTestCase(TestCase):
    """
    Test cases for processing runs end to end on a tiny configuration.
    """

    def test_process_pending_run(self):
        """Test a pending run is simulated and its trials stored"""
        run = EvaluationService.start_evaluation(TINY_CONFIG, seed=5)
        self.assertTrue(EvaluationService.process_evaluation(run.run_id))

        run.refresh_from_db()
        self.assertEqual(run.status, 'completed')
        self.assertEqual(run.episode_count, 4)
        self.assertEqual(run.trials.count(), 2)
        self.assertIn('success_pct', run.summary['mean'])
        self.assertIsNotNone(run.end_time)
        for row in run.trials.all():
            total = row.success_pct + row.violation_pct + row.collision_pct + row.timeout_pct
            self.assertAlmostEqual(total, 100.0)

    def test_process_is_reproducible(self):
        """Test two runs with the same seed store the same trials"""
        rows = []
        for _ in range(2):
            run = EvaluationService.start_evaluation(TINY_CONFIG, seed=9)
            EvaluationService.process_evaluation(run.run_id)
            rows.append(list(run.trials.values_list('trial', 'success_pct', 'violation_pct', 'collision_pct')))
        self.assertEqual(rows[0], rows[1])

    def test_process_only_pending(self):
        """Test finished or missing runs are not processed again"""
        run = EvaluationRun.objects.create(status='completed')
        self.assertFalse(EvaluationService.process_evaluation(run.run_id))
        self.assertFalse(EvaluationService.process_evaluation(uuid.uuid4()))

    def test_failure_recorded(self):
        """Test a run whose scenario cannot be placed ends as failed"""
        config = dict(
            TINY_CONFIG, episodes=10, trials=1,
            scenario={'max_non_ego': 6, 'min_spawn_gap': 500.0, 'max_spawn_retries': 1},
        )
        run = EvaluationService.start_evaluation(config)
        with self.assertLogs('wisemove', level='ERROR'):
            EvaluationService.process_evaluation(run.run_id)

        run.refresh_from_db()
        self.assertEqual(run.status, 'failed')
        self.assertIn('could not place', run.error_message)

    def test_manual_processing_swallows_errors(self):
        """Test the manual entry point reports failure instead of raising"""
        self.assertFalse(EvaluationService.process_evaluation_manually(uuid.uuid4()))
