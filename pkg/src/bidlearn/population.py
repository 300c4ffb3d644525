"""Population lifting of bandit learners to incomplete-information games.

Each agent keeps one learner instance per value grid point. Every round,
nature draws a value for each agent from the prior, only the drawn-value
learners act and receive their own realized utility as feedback, and the
recorded (value, bid) pairs aggregate into a distributional strategy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .auction import (
    ALL_LOSE,
    FIRST_PRICE,
    GameSpec,
    ValidationError,
    ex_post_utility,
)
from .learners import make_learner


@dataclass
class PopulationAgent:
    """One bidder as a population of per-value learners."""

    spec: GameSpec
    learners: list
    player: int = 0

    def __post_init__(self):
        if len(self.learners) != self.spec.values.n:
            raise ValidationError("need exactly one learner per value grid point")

    @classmethod
    def build(cls, spec: GameSpec, player: int, algorithm: str, **params) -> "PopulationAgent":
        m = spec.actions.m
        learners = [make_learner(algorithm, m, **params) for _ in range(spec.values.n)]
        return cls(spec=spec, learners=learners, player=player)


def draw_value_index(prior_weights: Sequence[float], rng) -> int:
    """Inverse-CDF draw from the prior using one uniform."""
    u = rng.random()
    acc = 0.0
    last = 0
    for i, w in enumerate(prior_weights):
        acc += w
        if u < acc:
            return i
        last = i
    return last


def population_round(agents: Sequence[PopulationAgent], rng) -> Tuple[np.ndarray, np.ndarray,
                                                                      np.ndarray, Optional[int],
                                                                      float]:
    """Advance all populations by one auction round.

    Returns (value indices, action indices, rewards, winner, price). The
    random draw order is: one value per agent, then one selection per
    agent, then the tie-break if the top bid is shared. The compiled
    simulation kernel replicates this order exactly.
    """
    spec = agents[0].spec
    for agent in agents[1:]:
        if agent.spec is not spec and agent.spec != spec:
            raise ValidationError("all agents must share one game")
    n_agents = len(agents)
    n_values = spec.values.n
    weights = spec.prior.weights

    value_idx = np.empty(n_agents, dtype=np.int64)
    for i in range(n_agents):
        value_idx[i] = 0 if n_values == 1 else draw_value_index(weights, rng)

    action_idx = np.empty(n_agents, dtype=np.int64)
    for i in range(n_agents):
        action_idx[i] = agents[i].learners[value_idx[i]].select(rng)

    bids = spec.actions.points[action_idx]
    winner, price = _resolve(bids, spec, rng)

    rewards = np.zeros(n_agents)
    for i in range(n_agents):
        won = 1 if winner == i else 0
        value = spec.values.points[value_idx[i]]
        rewards[i] = ex_post_utility(spec.utilities[i], value, won, price) if won else 0.0
        agents[i].learners[value_idx[i]].update(int(action_idx[i]), rewards[i])
    return value_idx, action_idx, rewards, winner, price


def _resolve(bids: np.ndarray, spec: GameSpec, rng) -> Tuple[Optional[int], float]:
    """Winner and price with the exact scalar arithmetic of the kernels."""
    reserve = spec.reserve
    top = -1.0
    for b in bids:
        if b >= reserve and b > top:
            top = b
    if top < 0.0:
        return None, 0.0
    count = 0
    for b in bids:
        if b == top:
            count += 1
    if count > 1:
        if spec.tie_rule == ALL_LOSE:
            return None, 0.0
        pick = int(rng.random() * count)
        seen = 0
        winner = -1
        for i, b in enumerate(bids):
            if b == top:
                if seen == pick:
                    winner = i
                    break
                seen += 1
    else:
        winner = int(np.flatnonzero(bids == top)[0])
    if spec.payment_rule == FIRST_PRICE:
        price = float(bids[winner])
    else:
        second = -1.0
        for i, b in enumerate(bids):
            if i != winner and b > second:
                second = b
        price = second if second > reserve else reserve
    return winner, price


@dataclass
class EmpiricalStrategy:
    """Raw (value, bid) occurrence counts over an iteration window."""

    counts: np.ndarray  # n x m, nonnegative integers
    window: Tuple[int, int]

    @property
    def rounds_per_value(self) -> np.ndarray:
        return self.counts.sum(axis=1)


def aggregate(value_idx: np.ndarray, action_idx: np.ndarray, spec: GameSpec,
              window: Tuple[int, int]) -> Tuple[EmpiricalStrategy, np.ndarray, List[int]]:
    """Tabulate one agent's play over a window into a distributional strategy.

    Returns the raw counts, the normalized n x m matrix whose row sums equal
    the prior weights, and the indices of value rows that were never drawn.
    Empty rows get their prior mass placed on the lowest bid at or above the
    reserve so the matrix stays feasible; callers can exclude them via the
    returned flags.
    """
    start, stop = window
    if stop <= start:
        raise ValidationError("window must be nonempty")
    v = np.asarray(value_idx[start:stop])
    a = np.asarray(action_idx[start:stop])
    n, m = spec.values.n, spec.actions.m
    counts = np.zeros((n, m), dtype=np.int64)
    np.add.at(counts, (v, a), 1)

    strategy = np.zeros((n, m))
    flagged = []
    reserve_col = reserve_action_index(spec)
    row_totals = counts.sum(axis=1)
    for i in range(n):
        if row_totals[i] == 0:
            flagged.append(i)
            strategy[i, reserve_col] = spec.prior.weights[i]
        else:
            strategy[i] = counts[i] * (spec.prior.weights[i] / row_totals[i])
    return EmpiricalStrategy(counts=counts, window=(start, stop)), strategy, flagged


def reserve_action_index(spec: GameSpec) -> int:
    """Lowest action at or above the reserve (highest action if none)."""
    at_or_above = np.flatnonzero(spec.actions.points >= spec.reserve)
    return int(at_or_above[0]) if at_or_above.size else spec.actions.m - 1
