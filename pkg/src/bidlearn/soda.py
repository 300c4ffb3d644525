"""Equilibrium computation via simultaneous gradient dynamics over
distributional strategies.

A distributional strategy is an n x m matrix over (value, bid) pairs whose
row sums equal the discrete prior. Expected utility is linear in a player's
own matrix, so its gradient doubles as the coefficient matrix for expected
utility, best responses, and utility-loss certificates.

Gradients are computed through the distribution of the highest opposing
bid (an order-statistic reduction over independent opponents) instead of
enumerating all opponent (value, bid) profiles, which keeps the cost
O(players^2 * actions) per entry instead of exponential in the player count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .auction import (
    ALL_LOSE,
    FIRST_PRICE,
    GameSpec,
    RANDOM_WINNER,
    UtilityModel,
    ValidationError,
)

ENTROPIC = "entropic"
PROJECTED = "projected"
FRANK_WOLFE = "frank_wolfe"
UPDATE_RULES = (ENTROPIC, PROJECTED, FRANK_WOLFE)


def uniform_strategy(spec: GameSpec) -> np.ndarray:
    """Feasible start: each row spreads its prior mass evenly over bids."""
    n, m = spec.values.n, spec.actions.m
    return np.tile(spec.prior.weights[:, None] / m, (1, m))


def check_feasible(s: np.ndarray, spec: GameSpec, tol: float = 1e-10) -> None:
    """Raise unless entries are nonnegative and row sums match the prior."""
    if np.any(s < -tol):
        raise ValidationError("strategy has negative entries")
    err = np.abs(s.sum(axis=1) - spec.prior.weights).max()
    if err > tol:
        raise ValidationError(f"row sums deviate from the prior by {err:.2e}")


def winner_utility_matrix(model: UtilityModel, values: np.ndarray,
                          prices: np.ndarray) -> np.ndarray:
    """Ex-post utility of winning, for every (value, price) pair."""
    v = np.asarray(values, dtype=float)[:, None]
    p = np.asarray(prices, dtype=float)[None, :]
    kind = model.kind
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == "QL":
            out = v - p
        elif kind == "ROI":
            out = (v - p) / p
        elif kind == "ROS":
            out = v / p
        elif kind == "ROSB":
            out = v / p + np.log(model.budget - p)
        elif kind == "ROIS":
            out = (v - (1.0 - model.mix) * p) / p
        elif kind == "QLB":
            out = (v - p) + np.log(model.budget - p)
        elif kind == "ROIB":
            out = (v - p) / p + np.log(model.budget - p)
        else:
            raise ValidationError(f"unknown utility kind {kind!r}")
    return np.broadcast_to(out, (v.size, p.size)).copy()


def _opponent_tie_coefficients(below: np.ndarray, at: np.ndarray) -> np.ndarray:
    """Coefficients of prod_o (below_o + at_o z) for one bid level.

    Entry t is the probability that exactly t opponents bid at the level
    while the rest bid below it.
    """
    coef = np.array([1.0])
    for lo, eq in zip(below, at):
        shifted = np.concatenate(([0.0], coef * eq))
        coef = np.concatenate((coef * lo, [0.0])) + shifted
    return coef


def win_shares(opponent_marginals: Sequence[np.ndarray], tie_rule: str):
    """Win probabilities per own-bid level against independent opponents.

    Returns (strict, tie_share, max_opp) where strict[j] is the probability
    that every opposing bid is strictly lower, tie_share[j] is the expected
    share of wins gained through ties at level j, and max_opp[k] is the pmf
    of the highest opposing bid level.
    """
    q = np.asarray(opponent_marginals, dtype=float)
    m = q.shape[1]
    cdf = np.cumsum(q, axis=1)
    below = np.concatenate((np.zeros((q.shape[0], 1)), cdf[:, :-1]), axis=1)

    strict = np.prod(below, axis=0)
    prod_cdf = np.prod(cdf, axis=0)
    max_opp = np.diff(np.concatenate(([0.0], prod_cdf)))

    tie_share = np.zeros(m)
    if tie_rule == RANDOM_WINNER:
        for j in range(m):
            coef = _opponent_tie_coefficients(below[:, j], q[:, j])
            shares = coef[1:] / (np.arange(1, coef.size) + 1.0)
            tie_share[j] = shares.sum()
    elif tie_rule != ALL_LOSE:
        raise ValidationError(f"unknown tie rule {tie_rule!r}")
    return strict, tie_share, max_opp


def gradient(spec: GameSpec, player: int, opponents: Sequence[np.ndarray]) -> np.ndarray:
    """Marginal expected utility of each (value, bid) cell for one player.

    ``opponents`` holds the distributional strategies of the other players.
    The result does not depend on the player's own strategy (expected
    utility is linear in it).
    """
    if len(opponents) != spec.n_players - 1:
        raise ValidationError("need one strategy per opponent")
    m = spec.actions.m
    for s in opponents:
        if s.shape != (spec.values.n, m):
            raise ValidationError("opponent strategy shape does not match the grids")
    model = spec.utilities[player]
    reserve = spec.reserve
    bids = spec.actions.points
    live = bids >= reserve

    marginals = [s.sum(axis=0) for s in opponents]
    strict, tie_share, max_opp = win_shares(marginals, spec.tie_rule)

    if spec.payment_rule == FIRST_PRICE:
        own_price = winner_utility_matrix(model, spec.values.points, np.maximum(bids, reserve))
        c = (strict + tie_share)[None, :] * own_price
    else:
        u_sp = winner_utility_matrix(model, spec.values.points, np.maximum(bids, reserve))
        below_cum = np.cumsum(u_sp * max_opp[None, :], axis=1)
        c = np.concatenate((np.zeros((spec.values.n, 1)), below_cum[:, :-1]), axis=1)
        c += tie_share[None, :] * u_sp
    c[:, ~live] = 0.0
    return c


def expected_utility(strategy: np.ndarray, grad: np.ndarray) -> float:
    """Expected utility of playing ``strategy`` against the opponents the
    gradient was computed for."""
    return float((strategy * grad).sum())


def best_response(spec: GameSpec, player: int, opponents: Sequence[np.ndarray],
                  grad: Optional[np.ndarray] = None) -> np.ndarray:
    """Pure best reply: each row's prior mass on its best bid (ties go to
    the lowest bid)."""
    if grad is None:
        grad = gradient(spec, player, opponents)
    br = np.zeros_like(grad)
    cols = np.argmax(grad, axis=1)
    br[np.arange(grad.shape[0]), cols] = spec.prior.weights
    return br


def utility_loss(spec: GameSpec, strategy: np.ndarray, opponents: Sequence[np.ndarray],
                 player: int = 0, grad: Optional[np.ndarray] = None,
                 exclude_rows: Sequence[int] = ()) -> float:
    """Relative gap to the best response, in [0, 1] for feasible inputs.

    Returns 0 exactly when ``strategy`` is a best response. When the best
    response itself earns nonpositive utility the gap is not certifiable
    and NaN is returned. ``exclude_rows`` drops flagged value rows from
    both sides of the ratio.
    """
    if grad is None:
        grad = gradient(spec, player, opponents)
    br = best_response(spec, player, opponents, grad=grad)
    mask = np.ones(grad.shape[0], dtype=bool)
    mask[list(exclude_rows)] = False
    u_cur = expected_utility(strategy[mask], grad[mask])
    u_br = expected_utility(br[mask], grad[mask])
    if u_br <= 0.0:
        return math.nan
    return 1.0 - u_cur / u_br


def project_rows_to_prior(z: np.ndarray, row_sums: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto {x >= 0, sum(x) = row_sum}."""
    n, m = z.shape
    u = -np.sort(-z, axis=1)
    cssv = np.cumsum(u, axis=1) - row_sums[:, None]
    k = np.arange(1, m + 1)
    cond = u - cssv / k > 0
    rho = m - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = cssv[np.arange(n), rho] / (rho + 1.0)
    return np.maximum(z - theta[:, None], 0.0)


def update(rule: str, s: np.ndarray, y: np.ndarray, grad: np.ndarray, step: float,
           iteration: int, prior: np.ndarray):
    """One simultaneous-dynamics update step; preserves feasibility exactly.

    Returns the new (strategy, dual) pair. The dual accumulator is only
    meaningful for the entropic rule and passes through otherwise.
    """
    if rule == ENTROPIC:
        y = y + step * grad
        shifted = y - y.max(axis=1, keepdims=True)
        w = np.exp(shifted)
        s = prior[:, None] * w / w.sum(axis=1, keepdims=True)
        return s, y
    if rule == PROJECTED:
        return project_rows_to_prior(s + step * grad, prior), y
    if rule == FRANK_WOLFE:
        gamma = 2.0 / (iteration + 2.0)
        vertex = np.zeros_like(s)
        cols = np.argmax(grad, axis=1)
        flat = grad.max(axis=1) - grad.min(axis=1) == 0.0
        vertex[np.arange(s.shape[0]), cols] = prior
        vertex[flat] = s[flat]  # no signal: stay put instead of drifting
        return (1.0 - gamma) * s + gamma * vertex, y
    raise ValidationError(f"unknown update rule {rule!r}")


@dataclass
class SodaConfig:
    """Run protocol for the simultaneous gradient dynamics."""

    update_rule: str = ENTROPIC
    step_size: float = 10.0
    step_decay: float = 0.05  # step at iteration t is step_size * t**-step_decay
    max_iters: int = 5000
    tol: float = 1e-4

    def __post_init__(self):
        if self.update_rule not in UPDATE_RULES:
            raise ValidationError(f"unknown update rule {self.update_rule!r}")
        if self.step_size <= 0 or self.tol <= 0:
            raise ValidationError("step size and tolerance must be positive")

    def step_at(self, iteration: int) -> float:
        return self.step_size * iteration ** (-self.step_decay)


@dataclass
class SodaResult:
    """Computed profile plus its convergence certificate."""

    strategies: List[np.ndarray]
    losses: List[float]
    iterations: int
    converged: bool

    @property
    def not_certifiable(self) -> bool:
        return any(math.isnan(l) for l in self.losses)


class DivergenceError(RuntimeError):
    """The dynamics produced non-finite values."""


def solve(spec: GameSpec, config: Optional[SodaConfig] = None, rng=None,
          callback: Optional[Callable] = None) -> SodaResult:
    """Run the dynamics from the uniform start until every player's
    relative utility loss drops below the tolerance or the iteration
    budget runs out.

    The procedure is deterministic; ``rng`` is accepted for interface
    symmetry with the simulators and is unused. ``callback(t, strategies)``
    fires after every update for instrumentation.
    """
    if config is None:
        config = SodaConfig()
    n_players = spec.n_players
    symmetric = spec.is_symmetric

    n_tracked = 1 if symmetric else n_players
    strategies = [uniform_strategy(spec) for _ in range(n_tracked)]
    duals = [np.zeros_like(strategies[0]) for _ in range(n_tracked)]

    def profile(i: int) -> List[np.ndarray]:
        if symmetric:
            return [strategies[0]] * (n_players - 1)
        return [strategies[j] for j in range(n_players) if j != i]

    def measure(t):
        grads = []
        for i in range(n_tracked):
            c = gradient(spec, i, profile(i))
            if not np.isfinite(c).all():
                raise DivergenceError(f"non-finite gradient for player {i} at iteration {t}")
            grads.append(c)
        losses = [
            utility_loss(spec, strategies[i], profile(i), player=i, grad=grads[i])
            for i in range(n_tracked)
        ]
        return grads, losses

    for t in range(1, config.max_iters + 1):
        grads, losses = measure(t)
        if all(l < config.tol for l in losses):
            return _finish(strategies, losses, t, True, symmetric, n_players)
        step = config.step_at(t)
        for i in range(n_tracked):
            strategies[i], duals[i] = update(
                config.update_rule, strategies[i], duals[i], grads[i], step, t,
                spec.prior.weights,
            )
        if callback is not None:
            callback(t, [s.copy() for s in strategies])
    _, losses = measure(config.max_iters)
    converged = all(l < config.tol for l in losses)
    return _finish(strategies, losses, config.max_iters, converged, symmetric, n_players)


def _finish(strategies, losses, iterations, converged, symmetric, n_players) -> SodaResult:
    if symmetric:
        strategies = [strategies[0].copy() for _ in range(n_players)]
        losses = list(losses) * n_players
    return SodaResult(strategies=strategies, losses=list(losses),
                      iterations=iterations, converged=converged)
