"""Adaptive mixture over the ranker bank.

Each base ranker is a fixed model. After every scored event the ranker with
the smallest loss pulls the mixture weights toward itself:

    theta_k <- (lam * theta_k + 1) / (lam + 1)   for the winner k
    theta_i <- lam * theta_i / (lam + 1)         otherwise

which keeps theta on the probability simplex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .candidates import TruthRecord

DEFAULT_LAMBDA = 0.99
DEFAULT_DELTA_D = 10.0


def ranking_loss(pred: Mapping[str, float], truth: TruthRecord, delta_d: float) -> float:
    """Rank error on discovered candidates plus ``delta_d`` per missed one."""
    if not truth:
        return 0.0
    total = 0.0
    for e, p_true in truth.ranks.items():
        if e in pred:
            total += (pred[e] - p_true) ** 2
        else:
            total += delta_d**2
    return math.sqrt(total)


def aggregate_rankings(theta: np.ndarray, rank_vectors: Sequence[np.ndarray]) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if len(rank_vectors) != len(theta):
        raise ValueError(f"{len(rank_vectors)} rank vectors for {len(theta)} weights")
    if not len(rank_vectors):
        raise ValueError("empty ranker bank")
    y = np.asarray(rank_vectors, dtype=float)
    return theta @ y


def mosr_rank(aggregated: Sequence[float]) -> np.ndarray:
    """Lowest combined rank goes on top; ties keep candidate order."""
    aggregated = np.asarray(aggregated, dtype=float)
    order = np.argsort(aggregated, kind="stable")
    ranks = np.empty(len(aggregated), dtype=int)
    ranks[order] = np.arange(len(aggregated))
    return ranks


def mrac_update(theta: np.ndarray, losses: Sequence[float], lam: float, ties: str = "share") -> np.ndarray:
    """One adaptation step toward the minimum-loss ranker.

    ``ties="share"`` splits the winner's unit of mass equally among all
    rankers at the minimum; ``ties="first"`` gives it to the lowest index.
    Both coincide when the minimum is unique.
    """
    theta = np.asarray(theta, dtype=float)
    losses = np.asarray(losses, dtype=float)
    if losses.shape != theta.shape:
        raise ValueError("one loss per ranker required")
    if ties == "first":
        winners = np.zeros(len(losses), dtype=bool)
        winners[int(np.argmin(losses))] = True
    elif ties == "share":
        winners = losses == losses.min()
    else:
        raise ValueError(f"unknown tie rule {ties!r}")
    return (lam * theta + winners / winners.sum()) / (lam + 1.0)


def uniform_weights(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


@dataclass(frozen=True)
class MOSRState:
    theta: np.ndarray
    lam: float = DEFAULT_LAMBDA
    delta_d: float = DEFAULT_DELTA_D
    event_count: int = 0

    def __post_init__(self):
        if not 0 < self.lam:
            raise ValueError("learning rate must be positive")
        if self.delta_d < 0:
            raise ValueError("delta_d must be non-negative")

    @classmethod
    def initial(cls, n_rankers: int, lam: float = DEFAULT_LAMBDA, delta_d: float = DEFAULT_DELTA_D) -> "MOSRState":
        return cls(uniform_weights(n_rankers), lam, delta_d)


@dataclass(frozen=True)
class LossRecord:
    per_ranker: np.ndarray
    mosr: float
    discovered: int
    undiscovered: int


def rank_map(candidates: Sequence[str], ranks: Sequence[int]) -> dict[str, int]:
    return {c: int(r) for c, r in zip(candidates, ranks)}


def mosr_step(
    state: MOSRState,
    candidates: Sequence[str],
    rank_vectors: Sequence[np.ndarray],
    truth: TruthRecord,
) -> tuple[np.ndarray, LossRecord, MOSRState]:
    """Rank with the current mixture, score every ranker, then adapt.

    With an empty truth record the ranking is still produced but the state
    is returned untouched.
    """
    ranks = mosr_rank(aggregate_rankings(state.theta, rank_vectors))
    per_ranker = np.array([ranking_loss(rank_map(candidates, y), truth, state.delta_d) for y in rank_vectors])
    mosr_loss = ranking_loss(rank_map(candidates, ranks), truth, state.delta_d)
    q = set(candidates)
    found = sum(1 for c in truth.true_set if c in q)
    record = LossRecord(per_ranker, mosr_loss, found, len(truth) - found)
    if not truth:
        return ranks, record, state
    new_state = replace(state, theta=mrac_update(state.theta, per_ranker, state.lam), event_count=state.event_count + 1)
    return ranks, record, new_state
