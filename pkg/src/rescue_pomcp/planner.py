"""Monte-Carlo tree search over action-observation histories.

Each decision runs a fixed number of sampled simulations from the current
belief. A simulation walks the tree picking actions by UCB, steps the
generative model, and descends into the child keyed by (action,
observation); the first unexpanded child is added to the tree and its value
seeded by a rollout. Returns are backed up along the path.

Exploration strategies shape the simulated step rewards:

  dfES  plain goal reward only
  rrES  +rr_bonus whenever the simulated drone sees the responder
  chES  -entropy_coeff * H at every step, tree and rollout
  thES  -entropy_coeff * H at tree steps only (rollout skips the filter)
  ehES  -entropy_coeff * H only at the expansion step, before the rollout
  fhES  -entropy_coeff * H only at the first tree step of each simulation

H is the entropy of the belief propagated along the simulated path
(goal-marginal gH or full-joint bH); per-node beliefs and entropies are
cached so each tree node pays for its filter step once.
"""

from __future__ import annotations

import math
import random
from bisect import bisect_right
from dataclasses import dataclass

from .belief import BayesFilter, Belief, InconsistentObservation, entropy
from .grid import Action, CostTable, GridMap, Position, UNREACHABLE
from .model import SearchModel, State

EXPLORATION_STRATEGIES = ("dfES", "rrES", "chES", "thES", "ehES", "fhES")
ROLLOUT_POLICIES = ("rRS", "stRS", "dnRS", "snRS", "dpRS", "spRS")
ROLLOUT_ACTION_MODES = ("bRA", "sRA")
BELIEF_FILTERS = ("cF", "aF")

_NUM_ACTIONS = 5

# entropy-bonus placement per strategy (None = no entropy bonus)
_BONUS_MODE = {"chES": "every", "thES": "every", "ehES": "expand", "fhES": "first"}


@dataclass
class PlannerConfig:
    num_samples: int = 100
    max_depth: int = 14
    ucb_c: float = 1.0
    gamma: float = 0.95
    exploration_strategy: str = "dfES"
    entropy_mode: str = "gH"
    entropy_coeff: float = 0.2
    rr_bonus: float = 0.1
    rollout_policy: str = "rRS"
    rollout_action_mode: str = "bRA"
    belief_filter: str = "cF"
    truncation_size: int = 20

    def __post_init__(self):
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.entropy_coeff <= 0.0:
            raise ValueError("entropy_coeff must be positive")
        if self.truncation_size < 1:
            raise ValueError("truncation_size must be >= 1")
        if self.exploration_strategy not in EXPLORATION_STRATEGIES:
            raise ValueError(f"unknown exploration strategy: {self.exploration_strategy}")
        if self.entropy_mode not in ("gH", "bH"):
            raise ValueError(f"unknown entropy mode: {self.entropy_mode}")
        if self.rollout_policy not in ROLLOUT_POLICIES:
            raise ValueError(f"unknown rollout policy: {self.rollout_policy}")
        if self.rollout_action_mode not in ROLLOUT_ACTION_MODES:
            raise ValueError(f"unknown rollout action mode: {self.rollout_action_mode}")
        if self.belief_filter not in BELIEF_FILTERS:
            raise ValueError(f"unknown belief filter: {self.belief_filter}")


class SearchNode:
    """One history node: visit counts, per-action stats, cached filter state."""

    __slots__ = ("n", "na", "q", "children", "belief", "entropy")

    def __init__(self):
        self.n = 0
        self.na = [0] * _NUM_ACTIONS
        self.q = [0.0] * _NUM_ACTIONS
        self.children = {}
        self.belief = None
        self.entropy = None


_FAILED_BELIEF = object()  # child observation impossible under truncated parent


def ucb_select(node: SearchNode, c: float) -> int:
    """argmax_a Q + c*sqrt(ln N / N_a); untried actions first, fixed order."""
    na = node.na
    for i in range(_NUM_ACTIONS):
        if na[i] == 0:
            return i
    logn = math.log(node.n)
    q = node.q
    best_i = 0
    best_v = q[0] + c * math.sqrt(logn / na[0])
    for i in range(1, _NUM_ACTIONS):
        v = q[i] + c * math.sqrt(logn / na[i])
        if v > best_v:
            best_v = v
            best_i = i
    return best_i


class AllTargetsVisited(ValueError):
    pass


def select_rollout_target(
    policy: str,
    sample_state: State,
    belief: Belief | None,
    visited: set[Position],
    costs: CostTable,
    rng: random.Random,
) -> Position:
    """Pick the candidate cell a rollout should steer toward."""
    candidates = costs.grid.target_candidates
    open_targets = [t for t in candidates if t not in visited]
    if not open_targets:
        raise AllTargetsVisited("every target candidate has been visited")
    if policy == "stRS":
        return sample_state.target
    drone = sample_state.drone
    if policy == "dnRS":
        return min(open_targets, key=lambda t: costs.cost(drone, t))
    if policy == "snRS":
        weights = [1.0 / (costs.cost(drone, t) + 1.0) for t in open_targets]
        return _weighted_choice(open_targets, weights, rng)
    if belief is None:
        raise ValueError(f"rollout policy {policy} needs a belief")
    marginal = belief.target_marginal()
    if policy == "dpRS":
        return max(open_targets, key=lambda t: marginal.get(t, 0.0))
    if policy == "spRS":
        weights = [marginal.get(t, 0.0) for t in open_targets]
        if sum(weights) <= 0.0:
            weights = [1.0] * len(open_targets)
        return _weighted_choice(open_targets, weights, rng)
    raise ValueError(f"unknown rollout policy: {policy}")


def _weighted_choice(options, weights, rng: random.Random):
    total = 0.0
    for w in weights:
        total += w
    u = rng.random() * total
    acc = 0.0
    for opt, w in zip(options, weights):
        acc += w
        if u < acc:
            return opt
    return options[-1]


def select_rollout_action(
    mode: str,
    state: State,
    target: Position,
    costs: CostTable,
    grid: GridMap,
    rng: random.Random,
) -> int:
    """bRA follows the precomputed policy; sRA softens it by 1/(distance+1)."""
    drone = state.drone
    if mode == "bRA":
        return int(costs.best_action(drone, target))
    dist = costs.distances_from(target)
    moves = grid.move_table[drone]
    weights = [1.0 / (dist.get(moves[a], UNREACHABLE) + 1.0) for a in range(_NUM_ACTIONS)]
    total = sum(weights)
    if total <= 0.0:
        raise ValueError(f"target {target} unreachable from {drone}")
    u = rng.random() * total
    acc = 0.0
    for a in range(_NUM_ACTIONS):
        acc += weights[a]
        if u < acc:
            return a
    return _NUM_ACTIONS - 1


class Planner:
    """One POMCP planner instance; owns a search tree per plan() call."""

    def __init__(self, model: SearchModel, config: PlannerConfig, rng: random.Random):
        self.model = model
        self.config = config
        self.rng = rng
        strategy = config.exploration_strategy
        self.rr_active = strategy == "rrES"
        self.bonus_mode = _BONUS_MODE.get(strategy)
        self.track_rollout_filter = strategy == "chES"
        self.needs_tree_belief = self.bonus_mode is not None or config.rollout_policy in (
            "dpRS",
            "spRS",
        )
        truncation = config.truncation_size if config.belief_filter == "aF" else None
        self.filter = (
            BayesFilter(model, truncation)
            if self.needs_tree_belief or self.track_rollout_filter
            else None
        )
        self._entropy_mode = config.entropy_mode if self.bonus_mode is not None else None
        self._candidate_set = frozenset(model.grid.target_candidates)
        self.stats: dict[str, int] = {}
        self.last_root: SearchNode | None = None

    def plan(self, root_belief: Belief, visited: set[Position] | frozenset = frozenset()) -> Action:
        """Run num_samples simulations from the belief; return the best action."""
        model = self.model
        rng = self.rng
        states = []
        cum = []
        total = 0.0
        for s, p in root_belief.probs.items():
            if not model.is_terminal(s):
                total += p
                states.append(s)
                cum.append(total)
        if not states:
            raise ValueError("cannot plan: every state in the belief is terminal")
        root = SearchNode()
        if self.needs_tree_belief:
            root.belief = root_belief
        self.stats = {
            "iterations": 0,
            "expansions": 0,
            "entropy_terms": 0,
            "rollout_aborts": 0,
        }
        base_visited = frozenset(visited)
        n = len(states)
        for _ in range(self.config.num_samples):
            i = bisect_right(cum, rng.random() * total)
            if i >= n:
                i = n - 1
            self.stats["iterations"] += 1
            self._simulate(states[i], root, 0, set(base_visited))
        self.last_root = root
        q = root.q
        best = 0
        for i in range(1, _NUM_ACTIONS):
            if q[i] > q[best]:
                best = i
        return Action(best)

    # --- simulation --------------------------------------------------------

    def _simulate(self, state: State, node: SearchNode, depth: int, visited: set) -> float:
        cfg = self.config
        if depth >= cfg.max_depth:
            return 0.0
        a = ucb_select(node, cfg.ucb_c)
        next_state, obs, r, terminal = self.model.step(state, a, self.rng)
        if self.rr_active and obs.responder_seen:
            r += cfg.rr_bonus
        if terminal:
            ret = r
        else:
            key = (a, obs)
            child = node.children.get(key)
            expanded = child is None
            if expanded:
                child = SearchNode()
                node.children[key] = child
                self.stats["expansions"] += 1
            if self.needs_tree_belief and not self._ensure_child_belief(node, child, a, obs):
                ret = r  # sampled path impossible under the truncated filter
            else:
                mode = self.bonus_mode
                if mode is not None and (
                    mode == "every"
                    or (mode == "expand" and expanded)
                    or (mode == "first" and depth == 0)
                ):
                    r -= cfg.entropy_coeff * child.entropy
                    self.stats["entropy_terms"] += 1
                drone = next_state.drone
                if drone in self._candidate_set:
                    visited.add(drone)
                if expanded:
                    future = self._rollout(next_state, depth + 1, child.belief, visited)
                else:
                    future = self._simulate(next_state, child, depth + 1, visited)
                ret = r + cfg.gamma * future
        node.n += 1
        na = node.na
        na[a] += 1
        node.q[a] += (ret - node.q[a]) / na[a]
        return ret

    def _ensure_child_belief(self, parent: SearchNode, child: SearchNode, a: int, obs) -> bool:
        b = child.belief
        if b is _FAILED_BELIEF:
            return False
        if b is None:
            try:
                new_belief, h = self.filter.step(parent.belief, a, obs, self._entropy_mode)
            except InconsistentObservation:
                child.belief = _FAILED_BELIEF
                return False
            child.belief = new_belief
            child.entropy = h
        return True

    def _rollout(self, state: State, depth: int, belief: Belief | None, visited: set) -> float:
        cfg = self.config
        model = self.model
        rng = self.rng
        max_depth = cfg.max_depth
        gamma = cfg.gamma
        policy = cfg.rollout_policy
        directed = policy != "rRS"
        track_filter = self.track_rollout_filter
        ret = 0.0
        disc = 1.0
        target: Position | None = None
        while depth < max_depth:
            if directed:
                if target is None or state.drone == target:
                    target = self._pick_rollout_target(state, belief, visited)
                a = select_rollout_action(
                    cfg.rollout_action_mode, state, target, model.costs, model.grid, rng
                )
            else:
                a = int(rng.random() * _NUM_ACTIONS)
            next_state, obs, r, terminal = model.step(state, a, rng)
            if self.rr_active and obs.responder_seen:
                r += cfg.rr_bonus
            if track_filter and not terminal:
                try:
                    belief, h = self.filter.step(belief, a, obs, self._entropy_mode)
                except InconsistentObservation:
                    ret += disc * r
                    self.stats["rollout_aborts"] += 1
                    break
                r -= cfg.entropy_coeff * h
                self.stats["entropy_terms"] += 1
            ret += disc * r
            if terminal:
                break
            drone = next_state.drone
            if drone in self._candidate_set:
                visited.add(drone)
            disc *= gamma
            state = next_state
            depth += 1
        return ret

    def _pick_rollout_target(self, state: State, belief: Belief | None, visited: set) -> Position:
        try:
            return select_rollout_target(
                self.config.rollout_policy, state, belief, visited, self.model.costs, self.rng
            )
        except AllTargetsVisited:
            # every candidate checked in this simulation: head for the
            # sampled state's own target, the only cell that can still pay
            return state.target
