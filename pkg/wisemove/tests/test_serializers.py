import json
import tempfile
from pathlib import Path

from django.conf import settings
from django.test import SimpleTestCase

from wisemove.dynamics import BicycleVariant
from wisemove.exceptions import ConfigurationError
from wisemove.harness import RunConfig
from wisemove.options import OptionGains
from wisemove.planner import PlannerMode
from wisemove.serializers import (
    EvaluationStartSerializer,
    VerifyRequestSerializer,
    build_run_config,
    load_run_config,
    run_config_to_data,
)


class BuildRunConfigTestCase(SimpleTestCase):

    def test_empty_document_gives_defaults(self):
        self.assertEqual(build_run_config({}), RunConfig())

    def test_nested_values(self):
        cfg = build_run_config({
            "seed": 4,
            "scenario": {"max_non_ego": 2, "geometry": {"speed_limit": 9.0}},
            "dynamics": {"bicycle_variant": "standard"},
            "options": {"Stop": {"timeout_steps": 120}},
            "reward": {"gamma": 0.9, "weights": {"speed": 0.2}},
            "planner": {"mode": "mcts", "iterations": 7},
        })
        self.assertEqual(cfg.seed, 4)
        self.assertEqual(cfg.scenario.seed, 4)
        self.assertEqual(cfg.scenario.max_non_ego, 2)
        self.assertEqual(cfg.scenario.geometry.speed_limit, 9.0)
        self.assertEqual(cfg.dynamics.bicycle_variant, BicycleVariant.STANDARD)
        self.assertEqual(cfg.options, {"Stop": OptionGains(timeout_steps=120)})
        self.assertEqual(cfg.reward.weights.speed, 0.2)
        self.assertEqual(cfg.planner, PlannerMode.MCTS)
        self.assertEqual(cfg.mcts.iterations, 7)
        self.assertIsNone(cfg.mcts.gamma)

    def test_paper_variant_alias(self):
        cfg = build_run_config({"dynamics": {"bicycle_variant": "paper"}})
        self.assertEqual(cfg.dynamics.bicycle_variant, BicycleVariant.SCALED_ANGLE)
        self.assertEqual(cfg, RunConfig())

    def test_planner_gamma_must_match_reward_gamma(self):
        with self.assertRaises(ConfigurationError) as ctx:
            build_run_config({"reward": {"gamma": 0.9}, "planner": {"gamma": 0.95}})
        self.assertIn("gamma", ctx.exception.errors["planner"])
        with self.assertRaises(ConfigurationError):
            build_run_config({"planner": {"gamma": 0.9}})
        cfg = build_run_config({"reward": {"gamma": 0.9}, "planner": {"gamma": 0.9}})
        self.assertEqual(cfg.mcts.gamma, cfg.reward.gamma)

    def test_unknown_keys_rejected(self):
        with self.assertRaises(ConfigurationError) as ctx:
            build_run_config({"episodes": 3, "colour": "red"})
        self.assertIn("colour", ctx.exception.errors)
        with self.assertRaises(ConfigurationError) as ctx:
            build_run_config({"scenario": {"geometry": {"lanes": 3}}})
        self.assertIn("lanes", ctx.exception.errors["scenario"]["geometry"])

    def test_rl_mode_rejected(self):
        with self.assertRaises(ConfigurationError) as ctx:
            build_run_config({"planner": {"mode": "rl"}})
        self.assertIn("learned high-level policy", str(ctx.exception.errors["planner"]["mode"][0]))

    def test_out_of_range_values_rejected(self):
        documents = (
            {"reward": {"gamma": 1.0}},
            {"reward": {"term_failure": 10.0}},
            {"scenario": {"max_non_ego": 7}},
            {"scenario": {"desired_speed_min": 12.0}},
            {"episodes": 0},
            {"options": {"Fly": {}}},
        )
        for document in documents:
            with self.subTest(document=document), self.assertRaises(ConfigurationError):
                build_run_config(document)

    def test_inconsistent_geometry_rejected(self):
        with self.assertRaises(ConfigurationError) as ctx:
            build_run_config({"scenario": {"geometry": {"route_length": 20.0}}})
        self.assertIn("non_field_errors", ctx.exception.errors)

    def test_document_round_trip(self):
        cfg = build_run_config({"seed": 2, "options": {"Follow": {"k_gap": 0.7}}, "planner": {"mode": "mcts"}})
        self.assertEqual(build_run_config(run_config_to_data(cfg)), cfg)


class LoadRunConfigTestCase(SimpleTestCase):

    def test_shipped_default(self):
        cfg = load_run_config(Path(settings.BASE_DIR) / "configs" / "default.json")
        self.assertEqual(cfg.episodes, 100)
        self.assertEqual(cfg.trials, 10)
        self.assertEqual(cfg.planner, PlannerMode.MANUAL)
        self.assertEqual(cfg.reward, RunConfig().reward)

    def test_missing_and_malformed_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ConfigurationError):
                load_run_config(Path(tmp) / "absent.json")
            broken = Path(tmp) / "broken.json"
            broken.write_text("{not json", encoding="utf-8")
            with self.assertRaises(ConfigurationError):
                load_run_config(broken)
            listing = Path(tmp) / "list.json"
            listing.write_text(json.dumps([1, 2]), encoding="utf-8")
            with self.assertRaises(ConfigurationError):
                load_run_config(listing)


class RequestSerializersTestCase(SimpleTestCase):

    def test_start_request(self):
        serializer = EvaluationStartSerializer(data={"config": {"episodes": 2}, "planner": "mcts", "seed": 5})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertFalse(EvaluationStartSerializer(data={"config": [1]}).is_valid())
        self.assertFalse(EvaluationStartSerializer(data={"planner": "rl"}).is_valid())

    def test_verify_request(self):
        serializer = VerifyRequestSerializer(data={"property": "G(a)", "trace": [{"a": True}, {"a": False}]})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertFalse(VerifyRequestSerializer(data={"trace": []}).is_valid())
