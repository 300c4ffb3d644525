"""Closed-form equilibrium bidding strategies and first-order-condition
residual checks, for uniform i.i.d. values on [0, 1].

These serve as oracles: computed or learned strategies are validated
against them, and the residual check verifies that a candidate strategy
satisfies the equilibrium ODE of its utility model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .auction import QL, ROI, ROSB, UtilityModel, ValidationError

QL_FPSB_UNIFORM = "ql_fpsb_uniform"
ROI_FPSB_UNIFORM = "roi_fpsb_uniform"
TRUTHFUL_SPSB = "truthful_spsb"
MAX_BID_ROS = "max_bid_ros"


def _shape(v):
    arr = np.asarray(v, dtype=float)
    return arr, np.isscalar(v) or arr.ndim == 0


def bne_fpsb_ql(v, n_players: int, reserve: float = 0.0):
    """First-price equilibrium bid for payoff maximizers.

    Below the reserve the bidder sits out (bids 0); at the reserve the bid
    equals the reserve, and the strategy is continuous there.
    """
    arr, scalar = _shape(v)
    n = n_players
    with np.errstate(divide="ignore", invalid="ignore"):
        bid = (n - 1) / n * arr + (reserve ** n) / (n * arr ** (n - 1))
    out = np.where(arr >= reserve, bid, 0.0)
    if reserve == 0.0:
        out = np.where(arr == 0.0, 0.0, out)
    return float(out) if scalar else out


def bne_fpsb_roi(v, n_players: int, reserve: float):
    """First-price equilibrium bid for ROI maximizers (positive reserve)."""
    if reserve <= 0:
        raise ValidationError("ROI equilibrium needs a positive reserve")
    arr, scalar = _shape(v)
    n = n_players
    with np.errstate(divide="ignore", invalid="ignore"):
        if n == 2:
            bid = arr / (1.0 - math.log(reserve) + np.log(arr))
        else:
            bid = (n - 2) * arr ** (n - 1) / ((n - 1) * arr ** (n - 2) - reserve ** (n - 2))
    out = np.where(arr >= reserve, bid, 0.0)
    return float(out) if scalar else out


def bne_spsb_truthful(v):
    """Dominant-strategy second-price bid: truthful."""
    arr, scalar = _shape(v)
    return float(arr) if scalar else arr.copy()


@dataclass(frozen=True)
class AnalyticStrategy:
    """A named closed-form strategy, callable on values."""

    kind: str
    n_players: int = 2
    reserve: float = 0.0
    max_bid: float = 1.0

    def __post_init__(self):
        if self.n_players < 2:
            raise ValidationError("need at least two players")
        if self.kind in (QL_FPSB_UNIFORM, ROI_FPSB_UNIFORM) and not 0 < self.reserve < 1:
            raise ValidationError(f"{self.kind} needs a reserve in (0, 1)")

    def __call__(self, v):
        if self.kind == QL_FPSB_UNIFORM:
            return bne_fpsb_ql(v, self.n_players, self.reserve)
        if self.kind == ROI_FPSB_UNIFORM:
            return bne_fpsb_roi(v, self.n_players, self.reserve)
        if self.kind == TRUTHFUL_SPSB:
            return bne_spsb_truthful(v)
        if self.kind == MAX_BID_ROS:
            arr, scalar = _shape(v)
            out = np.full_like(arr, self.max_bid)
            return float(out) if scalar else out
        raise ValidationError(f"unknown analytic strategy {self.kind!r}")


def win_cdf_uniform(v, n_players: int):
    """Probability that a value beats all opponents under a uniform prior."""
    arr, scalar = _shape(v)
    out = arr ** (n_players - 1)
    return float(out) if scalar else out


def ode_residual(strategy: Callable, model: Union[UtilityModel, str], n_players: int,
                 v: float, h: float = 1e-5) -> float:
    """|finite-difference slope - equilibrium ODE right-hand side| at v.

    The right-hand side assumes symmetric first-price bidding with a uniform
    prior. A true equilibrium strategy drives this residual to the size of
    the finite-difference error; any other strategy leaves it bounded away
    from zero.
    """
    kind = model.kind if isinstance(model, UtilityModel) else model
    beta = float(strategy(v))
    slope = (float(strategy(v + h)) - float(strategy(v - h))) / (2.0 * h)
    g_ratio = (n_players - 1) / v  # G'(v)/G(v) for G(v) = v^(N-1)
    if kind == QL:
        rhs = (v - beta) * g_ratio
    elif kind == ROI:
        rhs = (n_players - 1) * (beta / v - beta ** 2 / v ** 2)
    elif kind == ROSB:
        budget = model.budget
        rhs = (
            (budget - beta)
            * g_ratio
            * (v * beta + beta ** 2 * math.log(budget - beta))
            / (v * (budget - beta) - beta ** 2)
        )
    else:
        raise ValidationError(f"no equilibrium ODE for utility kind {kind!r}")
    return abs(slope - rhs)
