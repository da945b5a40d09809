import json
from dataclasses import asdict
from typing import Any, Dict, Mapping

from rest_framework import serializers

from .dynamics import VARIANT_ALIASES, BicycleVariant, DynamicsParams
from .exceptions import ConfigurationError
from .harness import OutputConfig, RunConfig
from .models import EvaluationRun, TrialResult
from .options import OptionGains
from .planner import MctsConfig, PlannerMode
from .reward import CostWeights, RewardSpec
from .world import NonEgoParams, RoadGeometry, ScenarioConfig


class StrictSerializer(serializers.Serializer):
    """Serializer that rejects keys it does not declare"""

    def to_internal_value(self, data):
        if isinstance(data, Mapping):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError(
                    {key: [f"Unknown configuration key '{key}'."] for key in unknown}
                )
        return super().to_internal_value(data)


# --- run configuration ------------------------------------------------------

class GeometrySerializer(StrictSerializer):
    lane_width = serializers.FloatField(default=RoadGeometry.lane_width, min_value=0.5)
    intersection_size = serializers.FloatField(default=RoadGeometry.intersection_size, min_value=1.0)
    stop_region_depth = serializers.FloatField(default=RoadGeometry.stop_region_depth, min_value=0.5)
    route_length = serializers.FloatField(default=RoadGeometry.route_length, min_value=10.0)
    goal_length = serializers.FloatField(default=RoadGeometry.goal_length, min_value=0.5)
    speed_limit = serializers.FloatField(default=RoadGeometry.speed_limit, min_value=0.1)
    v_stop_eps = serializers.FloatField(default=RoadGeometry.v_stop_eps, min_value=0.0)
    lookahead_dist = serializers.FloatField(default=RoadGeometry.lookahead_dist, min_value=0.0)
    headway_time = serializers.FloatField(default=RoadGeometry.headway_time, min_value=0.0)
    min_gap = serializers.FloatField(default=RoadGeometry.min_gap, min_value=0.0)
    veh_len = serializers.FloatField(default=RoadGeometry.veh_len, min_value=0.1)
    veh_wid = serializers.FloatField(default=RoadGeometry.veh_wid, min_value=0.1)


class NonEgoSerializer(StrictSerializer):
    k_v = serializers.FloatField(default=NonEgoParams.k_v, min_value=0.0)
    k_gap = serializers.FloatField(default=NonEgoParams.k_gap, min_value=0.0)
    k_rel = serializers.FloatField(default=NonEgoParams.k_rel, min_value=0.0)
    stop_margin = serializers.FloatField(default=NonEgoParams.stop_margin, min_value=0.0)
    stop_tolerance = serializers.FloatField(default=NonEgoParams.stop_tolerance, min_value=0.0)
    brake_trigger = serializers.FloatField(default=NonEgoParams.brake_trigger, min_value=0.0)


class ScenarioSerializer(StrictSerializer):
    max_non_ego = serializers.IntegerField(default=ScenarioConfig.max_non_ego, min_value=0, max_value=6)
    p_run_stop = serializers.FloatField(default=ScenarioConfig.p_run_stop, min_value=0.0, max_value=1.0)
    desired_speed_min = serializers.FloatField(default=ScenarioConfig.desired_speed_min, min_value=0.0)
    desired_speed_max = serializers.FloatField(default=ScenarioConfig.desired_speed_max, min_value=0.0)
    min_spawn_gap = serializers.FloatField(default=ScenarioConfig.min_spawn_gap, min_value=0.0)
    max_spawn_retries = serializers.IntegerField(default=ScenarioConfig.max_spawn_retries, min_value=1)
    geometry = GeometrySerializer(required=False)
    non_ego = NonEgoSerializer(required=False)

    def validate(self, attrs):
        if attrs["desired_speed_min"] > attrs["desired_speed_max"]:
            raise serializers.ValidationError("desired_speed_min must not exceed desired_speed_max")
        return attrs


class DynamicsSerializer(StrictSerializer):
    dt = serializers.FloatField(default=DynamicsParams.dt, min_value=1e-6)
    wheel_base = serializers.FloatField(default=DynamicsParams.wheel_base, min_value=1e-6)
    a_max = serializers.FloatField(default=DynamicsParams.a_max, min_value=1e-6)
    rho_max = serializers.FloatField(default=DynamicsParams.rho_max, min_value=1e-6)
    psi_max = serializers.FloatField(default=DynamicsParams.psi_max, min_value=1e-6)
    bicycle_variant = serializers.ChoiceField(
        choices=BicycleVariant.values + list(VARIANT_ALIASES), default=BicycleVariant.SCALED_ANGLE
    )

    def validate_bicycle_variant(self, value):
        return VARIANT_ALIASES.get(value, value)


class OptionGainsSerializer(StrictSerializer):
    k_v = serializers.FloatField(default=OptionGains.k_v, min_value=0.0)
    k_lat = serializers.FloatField(default=OptionGains.k_lat, min_value=0.0)
    k_head = serializers.FloatField(default=OptionGains.k_head, min_value=0.0)
    k_psi = serializers.FloatField(default=OptionGains.k_psi, min_value=0.0)
    k_gap = serializers.FloatField(default=OptionGains.k_gap, min_value=0.0)
    k_rel = serializers.FloatField(default=OptionGains.k_rel, min_value=0.0)
    reference_speed = serializers.FloatField(default=OptionGains.reference_speed, min_value=0.0)
    horizon_steps = serializers.IntegerField(default=OptionGains.horizon_steps, min_value=1)
    timeout_steps = serializers.IntegerField(default=OptionGains.timeout_steps, min_value=1)
    stop_margin = serializers.FloatField(default=OptionGains.stop_margin, min_value=0.0)
    stop_tolerance = serializers.FloatField(default=OptionGains.stop_tolerance, min_value=0.0)
    brake_trigger = serializers.FloatField(default=OptionGains.brake_trigger, min_value=0.0)
    lane_tolerance = serializers.FloatField(default=OptionGains.lane_tolerance, min_value=0.0)
    heading_tolerance = serializers.FloatField(default=OptionGains.heading_tolerance, min_value=0.0)
    training_monitors = serializers.BooleanField(default=OptionGains.training_monitors)


class OptionsSerializer(StrictSerializer):
    KeepLane = OptionGainsSerializer(required=False)
    Stop = OptionGainsSerializer(required=False)
    Wait = OptionGainsSerializer(required=False)
    Follow = OptionGainsSerializer(required=False)
    ChangeLane = OptionGainsSerializer(required=False)


class CostWeightsSerializer(StrictSerializer):
    speed = serializers.FloatField(default=CostWeights.speed, min_value=0.0)
    lateral = serializers.FloatField(default=CostWeights.lateral, min_value=0.0)
    jerk = serializers.FloatField(default=CostWeights.jerk, min_value=0.0)
    steer = serializers.FloatField(default=CostWeights.steer, min_value=0.0)


class RewardSerializer(StrictSerializer):
    gamma = serializers.FloatField(default=RewardSpec.gamma)
    weights = CostWeightsSerializer(required=False)
    term_success = serializers.FloatField(default=RewardSpec.term_success)
    term_failure = serializers.FloatField(default=RewardSpec.term_failure)
    timeout_reward = serializers.FloatField(default=RewardSpec.timeout_reward)

    def validate_gamma(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError("gamma must lie strictly between 0 and 1")
        return value

    def validate(self, attrs):
        if not attrs["term_success"] > 0 > attrs["term_failure"]:
            raise serializers.ValidationError("term_success must be positive and term_failure negative")
        return attrs


class PlannerSerializer(StrictSerializer):
    mode = serializers.ChoiceField(choices=PlannerMode.values + ["rl"], default=PlannerMode.MANUAL)
    iterations = serializers.IntegerField(default=MctsConfig.iterations, min_value=1)
    c_uct = serializers.FloatField(default=MctsConfig.c_uct, min_value=0.0)
    max_depth = serializers.IntegerField(default=MctsConfig.max_depth, min_value=1)
    rollout_horizon = serializers.IntegerField(default=MctsConfig.rollout_horizon, min_value=0)
    gamma = serializers.FloatField(default=None, allow_null=True)
    seed = serializers.IntegerField(default=MctsConfig.seed, min_value=0)

    def validate_mode(self, value):
        if value == "rl":
            raise serializers.ValidationError(
                "The 'rl' planner mode needs a learned high-level policy, which this service does not "
                "provide; use 'manual' or 'mcts'."
            )
        return value


class OutputSerializer(StrictSerializer):
    trace_dir = serializers.CharField(required=False, allow_null=True, default=None)
    metrics_csv = serializers.CharField(required=False, allow_null=True, default=None)
    table_path = serializers.CharField(required=False, allow_null=True, default=None)


class RunConfigSerializer(StrictSerializer):
    seed = serializers.IntegerField(default=RunConfig.seed, min_value=0)
    episodes = serializers.IntegerField(default=RunConfig.episodes, min_value=1)
    trials = serializers.IntegerField(default=RunConfig.trials, min_value=1)
    max_episode_steps = serializers.IntegerField(default=RunConfig.max_episode_steps, min_value=1)
    workers = serializers.IntegerField(default=RunConfig.workers, min_value=1)
    scenario = ScenarioSerializer(required=False)
    dynamics = DynamicsSerializer(required=False)
    options = OptionsSerializer(required=False)
    reward = RewardSerializer(required=False)
    planner = PlannerSerializer(required=False)
    output = OutputSerializer(required=False)

    def validate(self, attrs):
        gamma = attrs.get("planner", {}).get("gamma")
        reward_gamma = attrs.get("reward", {}).get("gamma", RewardSpec.gamma)
        if gamma is not None and gamma != reward_gamma:
            raise serializers.ValidationError(
                {"planner": {"gamma": [f"Must equal reward.gamma ({reward_gamma}); the planner discounts with it."]}}
            )
        return attrs

    def create(self, validated_data):
        data = validated_data
        scenario = dict(data.get("scenario", {}))
        reward = dict(data.get("reward", {}))
        planner = dict(data.get("planner", {}))
        mode = planner.pop("mode", PlannerMode.MANUAL)
        reward_spec = RewardSpec(weights=CostWeights(**reward.pop("weights", {})), **reward)
        try:
            return RunConfig(
                seed=data["seed"],
                episodes=data["episodes"],
                trials=data["trials"],
                max_episode_steps=data["max_episode_steps"],
                workers=data["workers"],
                scenario=ScenarioConfig(
                    geometry=RoadGeometry(**scenario.pop("geometry", {})),
                    non_ego=NonEgoParams(**scenario.pop("non_ego", {})),
                    dynamics=DynamicsParams(**data.get("dynamics", {})),
                    seed=data["seed"],
                    **scenario,
                ),
                options={name: OptionGains(**gains) for name, gains in data.get("options", {}).items()},
                reward=reward_spec,
                planner=mode,
                mcts=MctsConfig(**planner),
                output=OutputConfig(**data.get("output", {})),
            )
        except ValueError as e:
            raise ConfigurationError({"non_field_errors": [str(e)]}) from e


def build_run_config(data: Mapping[str, Any] = None) -> RunConfig:
    serializer = RunConfigSerializer(data=dict(data or {}))
    if not serializer.is_valid():
        raise ConfigurationError(serializer.errors)
    return serializer.save()


def load_run_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as e:
        raise ConfigurationError({"config": [f"Cannot read {path}: {e}"]}) from e
    except json.JSONDecodeError as e:
        raise ConfigurationError({"config": [f"{path} is not valid JSON: {e.msg}"]}) from e
    if not isinstance(data, dict):
        raise ConfigurationError({"config": ["The configuration must be a JSON object."]})
    return build_run_config(data)


def run_config_to_data(cfg: RunConfig) -> Dict[str, Any]:
    """Inverse of build_run_config: a configuration document for ``cfg``."""
    scenario = asdict(cfg.scenario)
    dynamics = scenario.pop("dynamics")
    scenario.pop("seed")
    reward = asdict(cfg.reward)
    planner = {"mode": str(cfg.planner), **asdict(cfg.mcts)}
    data = {
        "seed": cfg.seed,
        "episodes": cfg.episodes,
        "trials": cfg.trials,
        "max_episode_steps": cfg.max_episode_steps,
        "workers": cfg.workers,
        "scenario": scenario,
        "dynamics": dynamics,
        "options": {name: asdict(gains) for name, gains in cfg.options.items()},
        "reward": reward,
        "planner": planner,
        "output": asdict(cfg.output),
    }
    return json.loads(json.dumps(data))


# --- API --------------------------------------------------------------------

class TrialResultSerializer(serializers.ModelSerializer):
    class Meta:
        model = TrialResult
        fields = ['trial', 'success_pct', 'violation_pct', 'collision_pct', 'timeout_pct']


class EvaluationRunSerializer(serializers.ModelSerializer):
    duration_seconds = serializers.ReadOnlyField()

    class Meta:
        model = EvaluationRun
        fields = ['run_id', 'status', 'planner', 'seed', 'episode_count', 'start_time', 'end_time',
                  'created_at', 'updated_at', 'error_message', 'duration_seconds']
        read_only_fields = ['run_id', 'created_at', 'updated_at']


class EvaluationStartSerializer(serializers.Serializer):
    config = serializers.JSONField(required=False, help_text="Run configuration document; defaults apply to omitted keys")
    planner = serializers.ChoiceField(choices=PlannerMode.choices, required=False, help_text="Overrides planner.mode")
    seed = serializers.IntegerField(required=False, min_value=0, help_text="Overrides the base seed")

    def validate_config(self, value):
        if not isinstance(value, dict):
            raise serializers.ValidationError("config must be a JSON object")
        return value


class EvaluationResultSerializer(serializers.ModelSerializer):
    trials = TrialResultSerializer(many=True, read_only=True)

    class Meta:
        model = EvaluationRun
        fields = ['run_id', 'status', 'planner', 'seed', 'episode_count', 'summary', 'trials']


class RunStatisticsSerializer(serializers.Serializer):
    total_runs = serializers.IntegerField()
    completed_runs = serializers.IntegerField()
    failed_runs = serializers.IntegerField()
    pending_runs = serializers.IntegerField()
    in_progress_runs = serializers.IntegerField()
    cancelled_runs = serializers.IntegerField()
    average_duration_seconds = serializers.FloatField()
    total_episodes = serializers.IntegerField()
    mean_success_pct = serializers.DictField(child=serializers.FloatField())


class VerifyRequestSerializer(serializers.Serializer):
    property = serializers.CharField(help_text="Temporal property, e.g. G(in_intersection => intersection_is_clear)")
    trace = serializers.ListField(
        child=serializers.DictField(child=serializers.BooleanField()),
        help_text="Valuations, one mapping of proposition to boolean per step",
    )


class VerifyResponseSerializer(serializers.Serializer):
    verdict = serializers.CharField()
    violation_index = serializers.IntegerField(allow_null=True)
    steps = serializers.IntegerField()


class HealthSerializer(serializers.Serializer):
    status = serializers.ChoiceField(choices=["ok", "degraded"])
    timestamp = serializers.DateTimeField()
    planners = serializers.ListField(child=serializers.CharField())
    options = serializers.ListField(child=serializers.CharField())
    default_config = serializers.CharField()
    config_errors = serializers.JSONField(allow_null=True)
    active_runs = serializers.IntegerField()
