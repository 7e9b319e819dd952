"""The search-and-rescue POMDP: state, dynamics, observations, reward.

The hidden state is (drone, responder, target) on a shared grid. The drone
moves deterministically; the target is static; the responder walks toward
the target with a still/toward/random mixture. Observations report the
drone cell exactly and flag whether the responder or target share it.

`SearchModel` bundles a map, its cost table and the motion parameters into
the black-box generative model the planner samples from. All stochastic
methods take an explicit random source, so instances are safe to share
across workers that own their own streams.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import NamedTuple

from .grid import Action, CostTable, GridMap, Position, compute_costs


class State(NamedTuple):
    drone: Position
    responder: Position
    target: Position


class Observation(NamedTuple):
    drone: Position
    responder_seen: bool
    target_seen: bool


@dataclass
class ModelParams:
    p_still: float = 0.5
    toward_goal_factor: float = 0.95
    goal_reward: float = 1.0
    max_steps: int = 16
    terminal_radius: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_still <= 1.0:
            raise ValueError(f"p_still must be in [0,1], got {self.p_still}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if self.terminal_radius < 0:
            raise ValueError("terminal_radius must be non-negative")


def chebyshev(a: Position, b: Position) -> int:
    dx = a.x - b.x
    dy = a.y - b.y
    return max(dx if dx >= 0 else -dx, dy if dy >= 0 else -dy)


class SearchModel:
    def __init__(self, grid: GridMap, params: ModelParams, costs: CostTable | None = None):
        self.grid = grid
        self.params = params
        self.costs = costs if costs is not None else compute_costs(grid)
        p = params.p_still
        self._toward_threshold = p + params.toward_goal_factor * (1.0 - p)
        # per-target rows of exact one-step responder distributions,
        # filled lazily: _outcome_rows[target][cell] -> ((cell', prob), ...)
        self._outcome_rows: dict[Position, dict[Position, tuple[tuple[Position, float], ...]]] = {}

    # --- responder dynamics ---------------------------------------------

    def sample_responder(self, r: Position, target: Position, rng: random.Random) -> Position:
        """One responder step: stay / toward target / random neighbor."""
        if r == target:
            return r
        u = rng.random()
        if u < self.params.p_still:
            return r
        if u < self._toward_threshold:
            return self.costs.best_step(r, target)
        nbrs = self.grid.neighbor_table[r]
        if not nbrs:
            return r
        return nbrs[int(rng.random() * len(nbrs))]

    def outcome_row(self, target: Position) -> dict[Position, tuple[tuple[Position, float], ...]]:
        """Mutable per-target cache row; fill misses via responder_outcomes."""
        row = self._outcome_rows.get(target)
        if row is None:
            row = self._outcome_rows[target] = {}
        return row

    def responder_outcomes(self, r: Position, target: Position) -> tuple[tuple[Position, float], ...]:
        """Exact one-step responder distribution, cached per (cell, target)."""
        row = self.outcome_row(target)
        cached = row.get(r)
        if cached is not None:
            return cached
        if r == target:
            out = ((r, 1.0),)
        else:
            p_still = self.params.p_still
            p_toward = self.params.toward_goal_factor * (1.0 - p_still)
            p_random = (1.0 - p_still) - p_toward
            acc: dict[Position, float] = {}
            if p_still > 0.0:
                acc[r] = p_still
            if p_toward > 0.0:
                step = self.costs.best_step(r, target)
                acc[step] = acc.get(step, 0.0) + p_toward
            nbrs = self.grid.neighbor_table[r]
            if p_random > 0.0:
                if nbrs:
                    q = p_random / len(nbrs)
                    for n in nbrs:
                        acc[n] = acc.get(n, 0.0) + q
                else:
                    acc[r] = acc.get(r, 0.0) + p_random
            out = tuple(acc.items())
        row[r] = out
        return out

    # --- POMDP interface --------------------------------------------------

    def transition(self, state: State, action: int, rng: random.Random) -> State:
        drone = self.grid.move_table[state.drone][action]
        responder = self.sample_responder(state.responder, state.target, rng)
        return State(drone, responder, state.target)

    def transition_distribution(self, state: State, action: int) -> dict[State, float]:
        drone = self.grid.move_table[state.drone][action]
        target = state.target
        return {
            State(drone, r2, target): p
            for r2, p in self.responder_outcomes(state.responder, target)
        }

    def observe(self, state: State) -> Observation:
        d = state.drone
        return Observation(d, state.responder == d, state.target == d)

    def is_terminal(self, state: State) -> bool:
        radius = self.params.terminal_radius
        if radius == 0:
            return state.drone == state.target
        return chebyshev(state.drone, state.target) <= radius

    def reward(self, prev: State, action: int, next_state: State) -> float:
        # episodes and simulations stop at the first terminal transition,
        # so paying on every terminal entry keeps this a first-event reward
        return self.params.goal_reward if self.is_terminal(next_state) else 0.0

    def step(self, state: State, action: int, rng: random.Random):
        """Sample (next_state, observation, reward, terminal) in one call."""
        drone = self.grid.move_table[state.drone][action]
        target = state.target
        responder = self.sample_responder(state.responder, target, rng)
        next_state = State(drone, responder, target)
        if self.params.terminal_radius == 0:
            terminal = drone == target
        else:
            terminal = chebyshev(drone, target) <= self.params.terminal_radius
        obs = Observation(drone, responder == drone, target == drone)
        return next_state, obs, (self.params.goal_reward if terminal else 0.0), terminal

    def initial_belief(self):
        """Uniform prior over responder starts x target candidates."""
        from .belief import Belief

        grid = self.grid
        if not grid.responder_start_candidates or not grid.target_candidates:
            raise ValueError("map has empty candidate lists")
        n = len(grid.responder_start_candidates) * len(grid.target_candidates)
        p = 1.0 / n
        probs = {
            State(grid.drone_start, r, t): p
            for r in grid.responder_start_candidates
            for t in grid.target_candidates
        }
        snapshot = {t: 1.0 / len(grid.target_candidates) for t in grid.target_candidates}
        return Belief(probs, time=0, last_responder_obs=None, target_snapshot=snapshot)
