"""OWA aggregation over the three criteria and the bank of fixed rankers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

CRITERIA = ("closeness", "timeliness", "conciseness")

DEFAULT_RANKERS = (
    "owa:0.5",
    "owa:1.0",
    "owa:2.0",
    "owa:2.5",
    "timeline",
    "single:closeness",
    "single:timeliness",
    "single:conciseness",
)


def rim_weights(alpha: float, n: int) -> np.ndarray:
    """OWA weights from the RIM quantifier R(x) = x**alpha.

    w_i = R(i/n) - R((i-1)/n). alpha=0 is the MAX limit, alpha=1 the mean.
    """
    if alpha < 0:
        raise ValueError(f"RIM exponent must be >= 0, got {alpha}")
    if n < 1:
        raise ValueError("need at least one weight")
    if alpha == 0:
        w = np.zeros(n)
        w[0] = 1.0
        return w
    if alpha == 1:
        return np.full(n, 1.0 / n)
    grid = (np.arange(n + 1) / n) ** alpha
    return np.diff(grid)


def owa(weights: np.ndarray, x: np.ndarray) -> float:
    weights, x = np.asarray(weights, dtype=float), np.asarray(x, dtype=float)
    if weights.shape != x.shape:
        raise ValueError(f"length mismatch: {weights.shape} vs {x.shape}")
    # correctly rounded, so the result does not depend on summation order
    return math.fsum(weights * np.sort(x)[::-1])


@dataclass
class ScoreSnapshot:
    candidates: list[str]
    criteria: np.ndarray  # shape (n, 3): closeness, timeliness, conciseness

    def __post_init__(self):
        self.criteria = np.asarray(self.criteria, dtype=float).reshape(len(self.candidates), len(CRITERIA))

    def __len__(self):
        return len(self.candidates)


def normalize_snapshot(s: ScoreSnapshot) -> ScoreSnapshot:
    """Min-max scale each criterion column; constant columns become 0.5."""
    if not len(s):
        return s
    c = s.criteria
    lo, hi = c.min(axis=0), c.max(axis=0)
    span = hi - lo
    out = np.full_like(c, 0.5)
    varying = span > 0
    out[:, varying] = (c[:, varying] - lo[varying]) / span[varying]
    return ScoreSnapshot(list(s.candidates), out)


def rank_from_scores(scores: Sequence[float]) -> np.ndarray:
    """Rank 0 is the highest score; ties keep input order."""
    scores = np.asarray(scores, dtype=float)
    order = np.argsort(-scores, kind="stable")
    ranks = np.empty(len(scores), dtype=int)
    ranks[order] = np.arange(len(scores))
    return ranks


@dataclass(frozen=True)
class RankerSpec:
    kind: str  # "owa", "timeline" or "single"
    alpha: float | None = None
    criterion: str | None = None

    def __post_init__(self):
        if self.kind == "owa":
            if self.alpha is None or self.alpha < 0:
                raise ValueError("owa ranker needs alpha >= 0")
        elif self.kind == "single":
            if self.criterion not in CRITERIA:
                raise ValueError(f"unknown criterion {self.criterion!r}")
        elif self.kind != "timeline":
            raise ValueError(f"unknown ranker kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "RankerSpec":
        kind, _, arg = text.strip().partition(":")
        if kind == "owa":
            return cls("owa", alpha=float(arg))
        if kind == "single":
            return cls("single", criterion=arg)
        if kind == "timeline" and not arg:
            return cls("timeline")
        raise ValueError(f"bad ranker spec {text!r}")

    @property
    def name(self) -> str:
        if self.kind == "owa":
            return f"owa:{float(self.alpha)!r}"
        if self.kind == "single":
            return f"single:{self.criterion}"
        return "timeline"

    def __str__(self):
        return self.name


def parse_rankers(specs: Sequence[str] | str) -> list[RankerSpec]:
    if isinstance(specs, str):
        specs = [p for p in specs.strip().strip("[]").split(",") if p.strip()]
    return [RankerSpec.parse(s) for s in specs]


def apply_ranker(spec: RankerSpec, snapshot: ScoreSnapshot, time_feature: Sequence[float]) -> np.ndarray:
    """Rank one (normalised) snapshot; ``time_feature`` is seconds since trigger."""
    if spec.kind == "timeline":
        return rank_from_scores(time_feature)
    if spec.kind == "single":
        return rank_from_scores(snapshot.criteria[:, CRITERIA.index(spec.criterion)])
    w = rim_weights(spec.alpha, len(CRITERIA))
    scores = np.sort(snapshot.criteria, axis=1)[:, ::-1] @ w if len(snapshot) else np.zeros(0)
    return rank_from_scores(scores)
