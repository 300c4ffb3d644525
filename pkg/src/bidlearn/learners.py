"""Online learning policies over a finite bid grid with bandit feedback.

Each learner owns plain-Python state and consumes randomness only through
``rng.random()`` and ``rng.standard_normal()`` on a numpy Generator. The
compiled simulation kernel replays exactly the same draw sequence and
arithmetic, so trajectories are bit-identical across backends; keep any
change here in lockstep with ``_simcore.pyx``.
"""

from __future__ import annotations

import math

import numpy as np

from .auction import ValidationError

EXP3 = "exp3"
Q_LEARNING = "q"
EPSILON_GREEDY = "greedy"
UCB1_NAME = "ucb1"
THOMPSON = "thompson"
ALGORITHMS = (EXP3, Q_LEARNING, EPSILON_GREEDY, UCB1_NAME, THOMPSON)


def _rand_index(rng, k: int) -> int:
    """Uniform index in [0, k) from a single double draw."""
    return int(rng.random() * k)


def _argmax_random_tie(values, rng) -> int:
    """Argmax with exact ties broken uniformly at random.

    Draws from the rng only when there actually is a tie, so tie-free
    trajectories stay identical across tie-breaking policies.
    """
    best = values[0]
    count = 1
    for x in values[1:]:
        if x > best:
            best = x
            count = 1
        elif x == best:
            count += 1
    if count == 1:
        for i, x in enumerate(values):
            if x == best:
                return i
    pick = _rand_index(rng, count)
    seen = 0
    for i, x in enumerate(values):
        if x == best:
            if seen == pick:
                return i
            seen += 1
    raise AssertionError("unreachable")


class Exp3:
    """Multiplicative-weights bandit with importance-weighted rewards and
    a floor of ``epsilon/m`` exploration on every action."""

    def __init__(self, n_actions: int, epsilon: float = 0.01, learning_rate: float = 0.01):
        if not 0.0 <= epsilon < 1.0:
            raise ValidationError("epsilon must be in [0, 1)")
        if learning_rate <= 0.0:
            raise ValidationError("learning rate must be positive")
        self.n_actions = n_actions
        self.epsilon = epsilon
        self.learning_rate = learning_rate
        self.probs = [1.0 / n_actions] * n_actions

    def selection_probs(self) -> list:
        eps = self.epsilon
        u = eps / self.n_actions
        return [(1.0 - eps) * x + u for x in self.probs]

    def select(self, rng) -> int:
        u = rng.random()
        eps_term = self.epsilon / self.n_actions
        acc = 0.0
        for b, x in enumerate(self.probs):
            acc += (1.0 - self.epsilon) * x + eps_term
            if u < acc:
                return b
        return self.n_actions - 1

    def update(self, action: int, reward: float) -> None:
        # importance-weighted estimate: reward / P(action), zero elsewhere
        p = (1.0 - self.epsilon) * self.probs[action] + self.epsilon / self.n_actions
        self.probs[action] *= math.exp(self.learning_rate * reward / p)
        total = 0.0
        for x in self.probs:
            total += x
        for b in range(self.n_actions):
            self.probs[b] /= total


class QLearner:
    """Stateless Q-learning over bids with exponentially decaying
    epsilon-greedy exploration."""

    def __init__(self, n_actions: int, learning_rate: float = 0.05, discount: float = 0.99,
                 epsilon: float = 0.025, decay: float = 0.0002, init: float = 100.0):
        if not 0.0 <= discount < 1.0:
            raise ValidationError("discount must be in [0, 1)")
        self.n_actions = n_actions
        self.learning_rate = learning_rate
        self.discount = discount
        self.epsilon = epsilon
        self.decay = decay
        self.q = [float(init)] * n_actions
        self.t = 0

    @property
    def exploration_rate(self) -> float:
        return self.epsilon * math.exp(-self.decay * self.t)

    def select(self, rng) -> int:
        if rng.random() < self.exploration_rate:
            return _rand_index(rng, self.n_actions)
        return _argmax_random_tie(self.q, rng)

    def update(self, action: int, reward: float) -> None:
        best = self.q[0]
        for x in self.q[1:]:
            if x > best:
                best = x
        target = reward + self.discount * best
        self.q[action] = (1.0 - self.learning_rate) * self.q[action] + self.learning_rate * target
        self.t += 1


class MeanRewardLearner:
    """Shared bookkeeping for policies that track per-action mean rewards."""

    def __init__(self, n_actions: int):
        self.n_actions = n_actions
        self.counts = [0] * n_actions
        self.means = [0.0] * n_actions

    def _first_unvisited(self):
        for a, c in enumerate(self.counts):
            if c == 0:
                return a
        return None

    def update(self, action: int, reward: float) -> None:
        self.counts[action] += 1
        self.means[action] += (reward - self.means[action]) / self.counts[action]


class EpsilonGreedy(MeanRewardLearner):
    """Picks the best observed mean reward, exploring uniformly with a
    constant probability; unvisited actions are tried first."""

    def __init__(self, n_actions: int, epsilon: float = 0.05):
        super().__init__(n_actions)
        self.epsilon = epsilon

    def select(self, rng) -> int:
        if rng.random() < self.epsilon:
            return _rand_index(rng, self.n_actions)
        unvisited = self._first_unvisited()
        if unvisited is not None:
            return unvisited
        return _argmax_random_tie(self.means, rng)


class UCB1(MeanRewardLearner):
    """Mean reward plus a visit-count confidence bonus; unvisited actions
    are tried first in index order."""

    def __init__(self, n_actions: int, bonus: float = 4.0):
        super().__init__(n_actions)
        self.bonus = bonus
        self.t = 0

    def select(self, rng) -> int:
        unvisited = self._first_unvisited()
        if unvisited is not None:
            return unvisited
        log_t = math.log(self.t)
        scores = [m + self.bonus * math.sqrt(log_t / c)
                  for m, c in zip(self.means, self.counts)]
        return _argmax_random_tie(scores, rng)

    def update(self, action: int, reward: float) -> None:
        super().update(action, reward)
        self.t += 1


class ThompsonSampling:
    """Gaussian Thompson sampling with known observation noise.

    Each action keeps a conjugate normal posterior over its mean reward;
    selection samples one mean per action and plays the argmax.
    """

    def __init__(self, n_actions: int, prior_mean: float = 0.0, prior_var: float = 1.0,
                 obs_var: float = 1.0):
        if prior_var <= 0 or obs_var <= 0:
            raise ValidationError("variances must be positive")
        self.n_actions = n_actions
        self.obs_var = obs_var
        self.means = [float(prior_mean)] * n_actions
        self.variances = [float(prior_var)] * n_actions

    def select(self, rng) -> int:
        best = -math.inf
        pick = 0
        for a in range(self.n_actions):
            theta = self.means[a] + math.sqrt(self.variances[a]) * rng.standard_normal()
            if theta > best:
                best = theta
                pick = a
        return pick

    def update(self, action: int, reward: float) -> None:
        prec = 1.0 / self.variances[action]
        post_prec = prec + 1.0 / self.obs_var
        self.means[action] = (prec * self.means[action] + reward / self.obs_var) / post_prec
        self.variances[action] = 1.0 / post_prec


def make_learner(algorithm: str, n_actions: int, **params):
    """Instantiate a learner by name; unknown names or params raise."""
    table = {
        EXP3: Exp3,
        Q_LEARNING: QLearner,
        EPSILON_GREEDY: EpsilonGreedy,
        UCB1_NAME: UCB1,
        THOMPSON: ThompsonSampling,
    }
    if algorithm not in table:
        raise ValidationError(f"unknown learning algorithm {algorithm!r}")
    return table[algorithm](n_actions, **params)
