"""Episode loop, seeded experiments, aggregation, CSV output.

A trial plays one episode: sample a ground-truth state from the prior,
then repeatedly plan, act, observe, and filter until the drone is near the
target or the step cap runs out. Observation-impossible filter states are
rebuilt with the matching regeneration procedure. Everything is driven by
one per-trial random stream, so a (config, trial_seed) pair fully
determines the result apart from wall time.
"""

from __future__ import annotations

import csv
import json
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from itertools import product

from .belief import BayesFilter, InconsistentObservation
from .grid import FAMILIES, make_environment
from .model import ModelParams, SearchModel
from .planner import Planner, PlannerConfig


@dataclass
class TrialResult:
    success: bool
    steps: int
    responder_observations: int
    cumulative_reward: float
    wall_time: float
    seed: int


@dataclass
class ExperimentConfig:
    family: str = "SE"
    environment_seed: int = 0
    trials: int = 100
    max_steps: int = 16
    master_seed: int = 0
    model: ModelParams = field(default_factory=ModelParams)
    planner: PlannerConfig = field(default_factory=PlannerConfig)

    def __post_init__(self):
        if self.family.upper() not in FAMILIES:
            raise ValueError(f"unknown environment family: {self.family}")
        self.family = self.family.upper()
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        self.model = replace(self.model, max_steps=self.max_steps)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        model_data = data.pop("model", {})
        planner_data = data.pop("planner", {})
        _reject_unknown(data, cls, "experiment config")
        _reject_unknown(model_data, ModelParams, "model params")
        _reject_unknown(planner_data, PlannerConfig, "planner config")
        return cls(model=ModelParams(**model_data), planner=PlannerConfig(**planner_data), **data)

    def to_dict(self) -> dict:
        return asdict(self)

    def flat_fields(self) -> dict:
        """Flattened config view used as the CSV key columns."""
        out = {
            "family": self.family,
            "environment_seed": self.environment_seed,
            "trials": self.trials,
            "max_steps": self.max_steps,
            "master_seed": self.master_seed,
            "p_still": self.model.p_still,
            "terminal_radius": self.model.terminal_radius,
        }
        for name in (
            "num_samples",
            "max_depth",
            "ucb_c",
            "gamma",
            "exploration_strategy",
            "entropy_mode",
            "entropy_coeff",
            "rr_bonus",
            "rollout_policy",
            "rollout_action_mode",
            "belief_filter",
            "truncation_size",
        ):
            out[name] = getattr(self.planner, name)
        return out


def _reject_unknown(data: dict, cls, label: str) -> None:
    known = {f for f in cls.__dataclass_fields__} - {"model", "planner"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown {label} keys: {sorted(unknown)}")


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return ExperimentConfig.from_dict(json.load(fh))


METRIC_FIELDS = (
    "success_rate",
    "mean_steps",
    "total_robs",
    "total_reward",
    "total_time_s",
    "reward_per_time",
)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trials: list[TrialResult]

    @property
    def success_rate(self) -> float:
        return sum(t.success for t in self.trials) / len(self.trials)

    @property
    def mean_steps(self) -> float:
        return sum(t.steps for t in self.trials) / len(self.trials)

    @property
    def total_robs(self) -> int:
        return sum(t.responder_observations for t in self.trials)

    @property
    def total_reward(self) -> float:
        return sum(t.cumulative_reward for t in self.trials)

    @property
    def total_time_s(self) -> float:
        return sum(t.wall_time for t in self.trials)

    @property
    def reward_per_time(self) -> float:
        elapsed = self.total_time_s
        return self.total_reward / elapsed if elapsed > 0 else 0.0

    def to_row(self) -> dict:
        row = self.config.flat_fields()
        for name in METRIC_FIELDS:
            row[name] = getattr(self, name)
        return row


def build_model(config: ExperimentConfig) -> SearchModel:
    grid = make_environment(config.family, config.environment_seed)
    return SearchModel(grid, config.model)


def run_trial(config: ExperimentConfig, trial_seed: int, model: SearchModel | None = None) -> TrialResult:
    """Play one seeded episode and collect its metrics."""
    if model is None:
        model = build_model(config)
    rng = random.Random(trial_seed)
    grid = model.grid
    candidate_set = frozenset(grid.target_candidates)
    truncation = (
        config.planner.truncation_size if config.planner.belief_filter == "aF" else None
    )
    filt = BayesFilter(model, truncation)
    planner = Planner(model, config.planner, rng)

    belief = model.initial_belief()
    ground = belief.sample(rng)
    visited: set = set()
    steps = 0
    robs = 0
    reward = 0.0
    wall = 0.0
    success = model.is_terminal(ground)
    if success:
        reward += model.params.goal_reward
    else:
        for _ in range(config.max_steps):
            t0 = time.perf_counter()
            try:
                action = planner.plan(belief, visited)
            except Exception as exc:
                raise RuntimeError(
                    f"planner failed (trial_seed={trial_seed}, step={steps})"
                ) from exc
            wall += time.perf_counter() - t0
            ground = model.transition(ground, action, rng)
            obs = model.observe(ground)
            steps += 1
            if model.is_terminal(ground):
                success = True
                reward += model.params.goal_reward
                break
            if obs.responder_seen:
                robs += 1
            if obs.drone in candidate_set and not obs.target_seen:
                visited.add(obs.drone)
            predicted = filt.predict(belief, action)
            try:
                belief = filt.update(predicted, obs)
            except InconsistentObservation as signal:
                if signal.kind == "unexpected_responder":
                    belief = filt.regenerate_unexpected_responder(predicted, obs.drone, visited)
                else:
                    belief = filt.regenerate_empty_target(predicted, visited, rng)
            belief = filt.apply_truncation(belief)
        if not success:
            steps = config.max_steps
    return TrialResult(success, steps, robs, reward, wall, trial_seed)


# --- parallel trial workers -------------------------------------------------

_WORKER_CONFIG: ExperimentConfig | None = None
_WORKER_MODEL: SearchModel | None = None


def _init_worker(config: ExperimentConfig) -> None:
    global _WORKER_CONFIG, _WORKER_MODEL
    _WORKER_CONFIG = config
    _WORKER_MODEL = build_model(config)


def _run_worker_trial(trial_seed: int) -> TrialResult:
    return run_trial(_WORKER_CONFIG, trial_seed, _WORKER_MODEL)


def run_experiment(
    config: ExperimentConfig,
    workers: int = 1,
    csv_path=None,
) -> ExperimentResult:
    """Run config.trials seeded trials (seeds master_seed + index) and aggregate."""
    seeds = [config.master_seed + i for i in range(config.trials)]
    if workers > 1:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(config,)
        ) as pool:
            trials = list(pool.map(_run_worker_trial, seeds))
    else:
        model = build_model(config)
        trials = [run_trial(config, seed, model) for seed in seeds]
    result = ExperimentResult(config, trials)
    if csv_path is not None:
        write_results_csv(csv_path, [result])
    return result


def sweep(
    configs: list[ExperimentConfig],
    workers: int = 1,
    csv_path=None,
) -> list[ExperimentResult]:
    """Run several configurations; output rows sorted by their config fields.

    A configuration that errors is reported on stderr and skipped; the
    remaining rows still come out.
    """
    if not configs:
        raise ValueError("sweep needs at least one configuration")
    indexed = sorted(configs, key=lambda c: tuple(str(v) for v in c.flat_fields().values()))
    results = []
    for cfg in indexed:
        try:
            results.append(run_experiment(cfg, workers=workers))
        except Exception as exc:  # noqa: BLE001 - isolate per-config failures
            print(f"sweep: configuration failed ({exc}): {cfg.flat_fields()}", file=sys.stderr)
    if csv_path is not None:
        write_results_csv(csv_path, results)
    return results


def expand_grid(data: dict) -> list[ExperimentConfig]:
    """Build the config list for a sweep from its JSON description.

    Either {"configs": [<config>, ...]} or {"base": <config>, "vary":
    {"planner.exploration_strategy": [...], ...}} with dotted paths into
    the nested config; the cartesian product of all vary lists is taken.
    """
    if "configs" in data:
        extra = set(data) - {"configs"}
        if extra:
            raise ValueError(f"unknown grid keys: {sorted(extra)}")
        return [ExperimentConfig.from_dict(d) for d in data["configs"]]
    extra = set(data) - {"base", "vary"}
    if extra:
        raise ValueError(f"unknown grid keys: {sorted(extra)}")
    base = data.get("base", {})
    vary = data.get("vary", {})
    keys = sorted(vary)
    configs = []
    for combo in product(*(vary[k] for k in keys)):
        merged = json.loads(json.dumps(base))
        for key, value in zip(keys, combo):
            node = merged
            parts = key.split(".")
            for part in parts[:-1]:
                node = node.setdefault(part, {})
            node[parts[-1]] = value
        configs.append(ExperimentConfig.from_dict(merged))
    return configs


def write_results_csv(path, results: list[ExperimentResult]) -> None:
    if not results:
        raise ValueError("no results to write")
    fieldnames = list(results[0].to_row().keys())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for res in results:
            writer.writerow(res.to_row())
