"""Single-round sealed-bid auction mechanics and bidder utility models.

Everything here is pure given an explicit numpy Generator, so games can be
simulated from many threads as long as each one owns its random source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats

FIRST_PRICE = "first_price"
SECOND_PRICE = "second_price"
PAYMENT_RULES = (FIRST_PRICE, SECOND_PRICE)

RANDOM_WINNER = "random_winner"
ALL_LOSE = "all_lose"
TIE_RULES = (RANDOM_WINNER, ALL_LOSE)

QL = "QL"
ROI = "ROI"
ROS = "ROS"
ROSB = "ROSB"
ROIS = "ROIS"
QLB = "QLB"
ROIB = "ROIB"
UTILITY_KINDS = (QL, ROI, ROS, ROSB, ROIS, QLB, ROIB)

# kinds that divide by the price paid -> a positive reserve is mandatory
PRICE_RATIO_KINDS = frozenset({ROI, ROS, ROSB, ROIS, ROIB})
# kinds with a log(budget - price) barrier on winning
BARRIER_KINDS = frozenset({ROSB, QLB, ROIB})


class ValidationError(ValueError):
    """Raised when a grid, model, or bid violates its invariants."""


def _as_grid_array(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValidationError("grid needs at least one point")
    if arr.size > 1 and not np.all(np.diff(arr) > 0):
        raise ValidationError("grid points must be strictly increasing")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ValueGrid:
    """Discrete valuation levels in [0, 1]."""

    points: np.ndarray

    def __post_init__(self):
        arr = _as_grid_array(self.points)
        if arr[0] < 0.0 or arr[-1] > 1.0:
            raise ValidationError("valuations must lie in [0, 1]")
        object.__setattr__(self, "points", arr)

    @classmethod
    def equidistant(cls, n: int, lo: float = 0.0, hi: float = 1.0) -> "ValueGrid":
        return cls(np.linspace(lo, hi, n))

    @property
    def n(self) -> int:
        return self.points.size


@dataclass(frozen=True)
class ActionGrid:
    """Discrete bid levels, nonnegative and increasing."""

    points: np.ndarray

    def __post_init__(self):
        arr = _as_grid_array(self.points)
        if arr[0] < 0.0:
            raise ValidationError("bids must be nonnegative")
        object.__setattr__(self, "points", arr)

    @classmethod
    def equidistant(cls, m: int, lo: float = 0.0, hi: float = 1.0) -> "ActionGrid":
        return cls(np.linspace(lo, hi, m))

    @property
    def m(self) -> int:
        return self.points.size

    @property
    def max_bid(self) -> float:
        return float(self.points[-1])


@dataclass(frozen=True)
class DiscretePrior:
    """Probability weights over the points of a ValueGrid."""

    weights: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.weights, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError("prior needs at least one weight")
        if np.any(arr < 0):
            raise ValidationError("prior weights must be nonnegative")
        if abs(arr.sum() - 1.0) > 1e-12:
            raise ValidationError("prior weights must sum to 1 within 1e-12")
        arr.flags.writeable = False
        object.__setattr__(self, "weights", arr)

    @property
    def n(self) -> int:
        return self.weights.size

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.weights)


@dataclass(frozen=True)
class Uniform:
    """Uniform value distribution on [lo, hi]."""

    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValidationError("need hi > lo")

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * rng.random(size)


@dataclass(frozen=True)
class TruncatedGaussian:
    """Gaussian value distribution truncated to [lo, hi]."""

    mu: float
    sigma: float
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValidationError("sigma must be positive")
        if not self.hi > self.lo:
            raise ValidationError("need hi > lo")

    def _dist(self):
        a = (self.lo - self.mu) / self.sigma
        b = (self.hi - self.mu) / self.sigma
        return stats.truncnorm(a, b, loc=self.mu, scale=self.sigma)

    def cdf(self, x):
        return self._dist().cdf(x)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self._dist().ppf(rng.random(size))


ValueDistribution = Union[Uniform, TruncatedGaussian]


def build_prior(distribution: ValueDistribution, grid: ValueGrid) -> DiscretePrior:
    """Discretize a continuous distribution onto a value grid.

    Each grid point receives the probability mass of its nearest-neighbor
    cell, with cell boundaries at the midpoints between adjacent grid points
    and the outer cells extended to the distribution's support. The weights
    are renormalized so truncation never loses mass.
    """
    pts = grid.points
    edges = np.empty(pts.size + 1)
    edges[0] = distribution.lo
    edges[-1] = distribution.hi
    edges[1:-1] = 0.5 * (pts[1:] + pts[:-1])
    cdf = np.asarray(distribution.cdf(edges), dtype=float)
    weights = np.diff(cdf)
    total = weights.sum()
    if total <= 0:
        raise ValidationError("distribution places no mass on the grid's support")
    return DiscretePrior(weights / total)


@dataclass(frozen=True)
class UtilityModel:
    """Ex-post objective of a bidder.

    kind     one of QL, ROI, ROS, ROSB, ROIS, QLB, ROIB
    reserve  minimum winning bid; must be positive for any kind that
             divides by the price
    budget   per-auction budget for the log-barrier kinds (ROSB/QLB/ROIB)
    mix      ROIS weight on the spend-ratio term, in [0, 1]
    """

    kind: str = QL
    reserve: float = 0.0
    budget: Optional[float] = None
    mix: Optional[float] = None

    def __post_init__(self):
        if self.kind not in UTILITY_KINDS:
            raise ValidationError(f"unknown utility kind {self.kind!r}")
        if self.reserve < 0:
            raise ValidationError("reserve must be nonnegative")
        if self.kind in PRICE_RATIO_KINDS and self.reserve <= 0:
            raise ValidationError(f"{self.kind} needs a positive reserve")
        if self.kind in BARRIER_KINDS:
            if self.budget is None or self.budget <= 0:
                raise ValidationError(f"{self.kind} needs a positive budget")
        if self.kind == ROIS:
            if self.mix is None or not 0.0 <= self.mix <= 1.0:
                raise ValidationError("ROIS needs mix in [0, 1]")


def ex_post_utility(model: UtilityModel, value: float, won: int, price: float) -> float:
    """Realized utility of one bidder after one auction.

    Losers get exactly 0 regardless of kind; the budget barrier multiplies
    the allocation, so it never rewards or penalizes a loser.
    """
    if not won:
        return 0.0
    kind = model.kind
    if kind in PRICE_RATIO_KINDS and price <= 0.0:
        raise ValidationError(f"{kind} utility undefined at price 0; enforce a reserve")
    if kind in BARRIER_KINDS:
        if price >= model.budget:
            raise ValidationError("price must stay below the budget")
        barrier = math.log(model.budget - price)
    if kind == QL:
        return value - price
    if kind == ROI:
        return (value - price) / price
    if kind == ROS:
        return value / price
    if kind == ROSB:
        return value / price + barrier
    if kind == ROIS:
        return (value - (1.0 - model.mix) * price) / price
    if kind == QLB:
        return (value - price) + barrier
    if kind == ROIB:
        return (value - price) / price + barrier
    raise AssertionError(kind)


@dataclass(frozen=True)
class GameSpec:
    """A discretized sealed-bid auction game with symmetric i.i.d. values.

    `utility` may be a single model (shared by everyone) or one model per
    player; the prior and grids are always shared. The auction reserve is
    taken from the utility models, which must all agree on it.
    """

    n_players: int
    values: ValueGrid
    actions: ActionGrid
    prior: DiscretePrior
    payment_rule: str = FIRST_PRICE
    tie_rule: str = RANDOM_WINNER
    utility: Union[UtilityModel, Sequence[UtilityModel]] = UtilityModel(QL)

    def __post_init__(self):
        if self.n_players < 2:
            raise ValidationError("need at least two players")
        if self.payment_rule not in PAYMENT_RULES:
            raise ValidationError(f"unknown payment rule {self.payment_rule!r}")
        if self.tie_rule not in TIE_RULES:
            raise ValidationError(f"unknown tie rule {self.tie_rule!r}")
        if self.prior.n != self.values.n:
            raise ValidationError("prior length must match the value grid")
        if isinstance(self.utility, UtilityModel):
            utilities = (self.utility,) * self.n_players
        else:
            utilities = tuple(self.utility)
            if len(utilities) != self.n_players:
                raise ValidationError("need one utility model per player")
        reserves = {u.reserve for u in utilities}
        if len(reserves) != 1:
            raise ValidationError("all players must share one auction reserve")
        for u in utilities:
            if u.kind in BARRIER_KINDS and u.budget <= self.actions.max_bid:
                raise ValidationError("budget must exceed the highest possible price")
        object.__setattr__(self, "utility", utilities)

    @property
    def utilities(self) -> tuple:
        return self.utility

    @property
    def reserve(self) -> float:
        return self.utility[0].reserve

    @property
    def is_symmetric(self) -> bool:
        return all(u == self.utility[0] for u in self.utility[1:])


@dataclass(frozen=True)
class AuctionOutcome:
    """Result of one round: at most one winner, per-player payments."""

    winner: Optional[int]
    prices: np.ndarray
    allocation: np.ndarray

    @property
    def revenue(self) -> float:
        return float(self.prices.sum())


def _check_bids_on_grid(bids: np.ndarray, actions: ActionGrid) -> None:
    for b in bids:
        if b == 0.0:
            continue  # sitting out is always legal
        idx = np.searchsorted(actions.points, b)
        on_grid = (idx < actions.m and abs(actions.points[idx] - b) <= 1e-9) or (
            idx > 0 and abs(actions.points[idx - 1] - b) <= 1e-9
        )
        if not on_grid:
            raise ValidationError(f"bid {b} is not on the action grid")


def resolve_winner(bids: np.ndarray, reserve: float, tie_rule: str,
                   rng: np.random.Generator) -> Optional[int]:
    """Winner index under the reserve and tie rule, or None.

    Bids strictly below the reserve never win. Ties at the top are broken
    uniformly at random (RANDOM_WINNER) or kill the sale (ALL_LOSE).
    """
    eligible = bids >= reserve
    if not eligible.any():
        return None
    top = bids[eligible].max()
    tied = np.flatnonzero(eligible & (bids == top))
    if tied.size == 1:
        return int(tied[0])
    if tie_rule == ALL_LOSE:
        return None
    return int(tied[int(rng.random() * tied.size)])


def winning_price(bids: np.ndarray, winner: int, payment_rule: str, reserve: float) -> float:
    """Payment of the winner: own bid, or the highest opposing bid floored
    at the reserve."""
    if payment_rule == FIRST_PRICE:
        return float(bids[winner])
    others = np.delete(bids, winner)
    return float(max(others.max(), reserve))


def run_round(bids, spec: GameSpec, rng: np.random.Generator) -> AuctionOutcome:
    """Execute one sealed-bid round for a full bid profile."""
    arr = np.asarray(bids, dtype=float)
    if arr.shape != (spec.n_players,):
        raise ValidationError("need exactly one bid per player")
    _check_bids_on_grid(arr, spec.actions)
    winner = resolve_winner(arr, spec.reserve, spec.tie_rule, rng)
    prices = np.zeros(spec.n_players)
    allocation = np.zeros(spec.n_players, dtype=int)
    if winner is not None:
        prices[winner] = winning_price(arr, winner, spec.payment_rule, spec.reserve)
        allocation[winner] = 1
    return AuctionOutcome(winner=winner, prices=prices, allocation=allocation)
