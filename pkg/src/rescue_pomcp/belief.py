"""Discrete Bayes filtering over hidden states, with truncation and recovery.

A belief is a finite distribution over `State` plus the bookkeeping needed
to rebuild it when an observation arrives that the current support calls
impossible: the last responder sighting (cell and step index) and the
per-target posterior snapshot taken at that sighting (or from the prior at
step 0). Two regeneration procedures consume that bookkeeping, one for an
expected target found empty and one for the responder turning up in an
unexpected cell.

Beliefs are value-semantic: every operation returns a new instance and
never mutates its input, so they can be shared freely between the episode
filter and planner tree nodes.
"""

from __future__ import annotations

import math
import random

from .grid import Position
from .model import Observation, SearchModel, State

ENTROPY_MODES = ("gH", "bH")

_INV_LN2 = 1.0 / math.log(2.0)


class Belief:
    __slots__ = ("probs", "time", "last_responder_obs", "target_snapshot", "_groups")

    def __init__(
        self,
        probs: dict[State, float],
        time: int = 0,
        last_responder_obs: tuple[Position, int] | None = None,
        target_snapshot: dict[Position, float] | None = None,
    ):
        self.probs = probs
        self.time = time
        self.last_responder_obs = last_responder_obs
        self.target_snapshot = target_snapshot if target_snapshot is not None else {}
        self._groups = None

    def __len__(self):
        return len(self.probs)

    def total_mass(self) -> float:
        return sum(self.probs.values())

    def drone_position(self) -> Position:
        for s in self.probs:
            return s.drone
        raise ValueError("empty belief has no drone position")

    def target_marginal(self) -> dict[Position, float]:
        out: dict[Position, float] = {}
        for s, p in self.probs.items():
            out[s.target] = out.get(s.target, 0.0) + p
        return out

    def responder_marginal(self) -> dict[Position, float]:
        out: dict[Position, float] = {}
        for s, p in self.probs.items():
            out[s.responder] = out.get(s.responder, 0.0) + p
        return out

    def sample(self, rng: random.Random) -> State:
        u = rng.random() * self.total_mass()
        acc = 0.0
        state = None
        for state, p in self.probs.items():
            acc += p
            if u < acc:
                return state
        return state  # float slack lands on the last state

    def grouped(self) -> dict[tuple[Position, Position], dict[Position, float]]:
        """Support split by (drone, target) into responder sub-distributions."""
        groups = self._groups
        if groups is None:
            groups = {}
            for (d, r, t), p in self.probs.items():
                key = (d, t)
                bucket = groups.get(key)
                if bucket is None:
                    bucket = groups[key] = {}
                bucket[r] = p
            self._groups = groups
        return groups

    def _with_probs(self, probs: dict[State, float]) -> "Belief":
        # snapshot dicts are never mutated in place, so sharing is safe
        return Belief(probs, self.time, self.last_responder_obs, self.target_snapshot)


def entropy(belief: Belief, mode: str = "bH") -> float:
    """Shannon entropy in bits; gH marginalizes onto the target first."""
    if mode == "bH":
        values = belief.probs.values()
    elif mode == "gH":
        values = belief.target_marginal().values()
    else:
        raise ValueError(f"unknown entropy mode: {mode}")
    h = 0.0
    for p in values:
        if p > 0.0:
            h -= p * math.log(p)
    return h * _INV_LN2


def truncate(belief: Belief, keep: int) -> Belief:
    """Keep the `keep` highest-probability states and renormalize.

    Ties break on the lexicographic state order so truncation is
    deterministic. Identity when the support already fits.
    """
    if keep < 1:
        raise ValueError("truncation size must be positive")
    if len(belief.probs) <= keep:
        return belief
    ranked = sorted(belief.probs.items(), key=lambda kv: (-kv[1], kv[0]))[:keep]
    total = sum(p for _, p in ranked)
    return belief._with_probs({s: p / total for s, p in ranked})


def belief_to_csv(belief: Belief) -> str:
    """Debug dump, one `x_d,y_d,x_r,y_r,x_t,y_t,prob` line per state."""
    lines = []
    for s in sorted(belief.probs):
        p = belief.probs[s]
        lines.append(
            f"{s.drone.x},{s.drone.y},{s.responder.x},{s.responder.y},{s.target.x},{s.target.y},{p!r}"
        )
    return "\n".join(lines) + "\n"


class InconsistentObservation(Exception):
    """The belief assigns zero probability to the received observation.

    Not a failure: the caller must rebuild the belief with the matching
    regeneration procedure. `kind` is "empty_target" when a fully-trusted
    target cell turned out empty (or the support otherwise collapsed) and
    "unexpected_responder" when the responder was sighted in a cell the
    belief ruled out.
    """

    def __init__(self, kind: str, observation: Observation):
        super().__init__(f"belief inconsistent with observation ({kind}): {observation}")
        self.kind = kind
        self.observation = observation


class BayesFilter:
    """Exact (cF) or truncated (aF) discrete Bayes filter for one model.

    `truncation=None` keeps the complete posterior; an integer keeps only
    that many top states after each update. Entropy consumers must read
    entropy before truncation; `step` hands both back.
    """

    def __init__(self, model: SearchModel, truncation: int | None = None):
        if truncation is not None and truncation < 1:
            raise ValueError("truncation size must be positive")
        self.model = model
        self.truncation = truncation

    def predict(self, belief: Belief, action: int) -> Belief:
        """Push the belief through one enumerated transition step."""
        model = self.model
        move_table = model.grid.move_table
        out: dict[State, float] = {}
        for (d, t), bucket in belief.grouped().items():
            d2 = move_table[d][action]
            row = model.outcome_row(t)
            compute = model.responder_outcomes
            acc: dict[Position, float] = {}
            for r, p in bucket.items():
                outs = row.get(r)
                if outs is None:
                    outs = compute(r, t)
                for r2, q in outs:
                    acc[r2] = acc.get(r2, 0.0) + p * q
            for r2, mass in acc.items():
                out[State(d2, r2, t)] = mass
        result = belief._with_probs(out)
        result.time = belief.time + 1
        return result

    def update(self, belief: Belief, obs: Observation) -> Belief:
        """Zero support states inconsistent with obs and renormalize.

        Raises InconsistentObservation when all mass is zeroed, tagged with
        the regeneration trigger that applies.
        """
        d = obs.drone
        r_seen = obs.responder_seen
        t_seen = obs.target_seen
        kept: dict[State, float] = {}
        total = 0.0
        for s, p in belief.probs.items():
            if s.drone != d:
                continue
            if (s.responder == d) != r_seen:
                continue
            if (s.target == d) != t_seen:
                continue
            kept[s] = p
            total += p
        if total <= 0.0:
            raise InconsistentObservation(self._classify_failure(belief, obs), obs)
        inv = 1.0 / total
        posterior = {s: p * inv for s, p in kept.items()}
        result = Belief(posterior, belief.time, belief.last_responder_obs, dict(belief.target_snapshot))
        if r_seen:
            result.last_responder_obs = (d, belief.time)
            result.target_snapshot = result.target_marginal()
        return result

    @staticmethod
    def _classify_failure(belief: Belief, obs: Observation) -> str:
        if obs.responder_seen:
            responder_mass = sum(p for s, p in belief.probs.items() if s.responder == obs.drone)
            if responder_mass <= 0.0:
                return "unexpected_responder"
        return "empty_target"

    def apply_truncation(self, belief: Belief) -> Belief:
        if self.truncation is None:
            return belief
        return truncate(belief, self.truncation)

    def step(self, belief: Belief, action: int, obs: Observation, entropy_mode: str | None = None):
        """predict + update (+ optional entropy, read before truncation).

        Returns (belief, entropy_or_None). Raises InconsistentObservation
        like `update`. Equivalent to composing predict and update, but the
        transition push skips whole target groups the observation rules
        out, which is what makes in-tree filtering affordable.
        """
        model = self.model
        move_table = model.grid.move_table
        d_obs = obs.drone
        r_seen = obs.responder_seen
        t_seen = obs.target_seen
        out: dict[State, float] = {}
        marginal: list[tuple[Position, float]] = []
        total = 0.0
        for (d, t), bucket in belief.grouped().items():
            d2 = move_table[d][action]
            if d2 != d_obs or (t == d_obs) != t_seen:
                continue
            row = model.outcome_row(t)
            compute = model.responder_outcomes
            acc: dict[Position, float] = {}
            for r, p in bucket.items():
                outs = row.get(r)
                if outs is None:
                    outs = compute(r, t)
                for r2, q in outs:
                    if (r2 == d_obs) != r_seen:
                        continue
                    acc[r2] = acc.get(r2, 0.0) + p * q
            t_mass = 0.0
            for r2, mass in acc.items():
                out[State(d2, r2, t)] = mass
                t_mass += mass
            if t_mass > 0.0:
                marginal.append((t, t_mass))
                total += t_mass
        if total <= 0.0:
            # rare path: rebuild the predicted belief so the failure is
            # classified exactly as a separate predict + update would
            self.update(self.predict(belief, action), obs)
            raise AssertionError("update unexpectedly succeeded on zero-mass step")
        inv = 1.0 / total
        for s in out:
            out[s] *= inv
        posterior = Belief(out, belief.time + 1, belief.last_responder_obs, belief.target_snapshot)
        if r_seen:
            posterior.last_responder_obs = (d_obs, posterior.time)
            posterior.target_snapshot = {t: m * inv for t, m in marginal}
        if entropy_mode is None:
            h = None
        else:
            if entropy_mode == "gH":
                values = [m * inv for _, m in marginal]
            elif entropy_mode == "bH":
                values = out.values()
            else:
                raise ValueError(f"unknown entropy mode: {entropy_mode}")
            h = 0.0
            for p in values:
                if p > 0.0:
                    h -= p * math.log(p)
            h *= _INV_LN2
        return self.apply_truncation(posterior), h

    # --- regeneration ------------------------------------------------------

    def _unvisited_targets(self, visited: set[Position]) -> list[Position]:
        remaining = [t for t in self.model.grid.target_candidates if t not in visited]
        if not remaining:
            raise ValueError("no unvisited target candidates left to regenerate over")
        return remaining

    def regenerate_empty_target(
        self,
        belief: Belief,
        visited: set[Position],
        rng: random.Random,
    ) -> Belief:
        """Rebuild the belief by replaying the responder toward each open target.

        `belief` is the predicted belief whose update just failed; its drone
        position is the drone's known current cell. For every unvisited
        target the responder is walked forward from its last sighting (or
        from every start candidate when never sighted) to the current step,
        and the resulting state inherits the target's snapshot weight.
        """
        model = self.model
        drone = belief.drone_position()
        remaining = self._unvisited_targets(visited)
        snapshot = belief.target_snapshot
        if belief.last_responder_obs is not None:
            origin, t_obs = belief.last_responder_obs
            sources = [origin]
            elapsed = belief.time - t_obs
        else:
            sources = list(model.grid.responder_start_candidates)
            elapsed = belief.time
        weights = [snapshot.get(t, 0.0) for t in remaining]
        if sum(weights) <= 0.0:
            weights = [1.0] * len(remaining)  # snapshot mass all on checked cells
        probs: dict[State, float] = {}
        for target, w in zip(remaining, weights):
            if w <= 0.0:
                continue
            share = w / len(sources)
            for source in sources:
                r = source
                for _ in range(elapsed):
                    r = model.sample_responder(r, target, rng)
                s = State(drone, r, target)
                probs[s] = probs.get(s, 0.0) + share
        total = sum(probs.values())
        probs = {s: p / total for s, p in probs.items()}
        return Belief(probs, belief.time, belief.last_responder_obs, dict(snapshot))

    def regenerate_unexpected_responder(
        self,
        belief: Belief,
        sighting: Position,
        visited: set[Position],
    ) -> Belief:
        """Rebuild the belief after sighting the responder in a ruled-out cell.

        Each unvisited target g gets the state (drone, responder at the
        sighting cell, g) weighted by the snapshot probability times the
        detour efficiency cost(old, g) / (cost(old, sighting) +
        cost(sighting, g)), then the set is normalized.
        """
        model = self.model
        costs = model.costs
        remaining = self._unvisited_targets(visited)
        snapshot = belief.target_snapshot
        if belief.last_responder_obs is not None:
            l_old = belief.last_responder_obs[0]
        else:
            marginal = belief.responder_marginal()
            l_old = max(sorted(marginal), key=lambda p: marginal[p])
        raw: dict[State, float] = {}
        for target in remaining:
            detour = costs.cost(l_old, sighting) + costs.cost(sighting, target)
            if detour == 0.0:
                raise ValueError(
                    f"zero detour cost for sighting {sighting}: responder there was not unexpected"
                )
            direct = costs.cost(l_old, target)
            if not math.isfinite(detour) or not math.isfinite(direct):
                continue
            weight = snapshot.get(target, 0.0) * direct / detour
            raw[State(sighting, sighting, target)] = weight
        total = sum(raw.values())
        if total <= 0.0:
            raw = {s: 1.0 for s in raw} or {
                State(sighting, sighting, t): 1.0 for t in remaining
            }
            total = sum(raw.values())
        probs = {s: w / total for s, w in raw.items()}
        result = Belief(probs, belief.time, (sighting, belief.time), None)
        result.target_snapshot = result.target_marginal()
        return result
