"""Per-candidate criterion scores: closeness, timeliness and conciseness."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .email_stream import DAY, AddressDirectory, Direction, EmailObject, FlowList
from .social_graph import DISTANCE_METHODS, SocialGraph, social_distance

DEFAULT_WINDOW = 3 * DAY


@dataclass(frozen=True)
class ClosenessConfig:
    w1: float = 1.0
    w2: float = 1.0
    w_phi: int = DEFAULT_WINDOW
    distance_method: str = "two_paths"

    def __post_init__(self):
        if self.w_phi <= 0:
            raise ValueError("closeness window must be positive")
        if self.distance_method not in DISTANCE_METHODS:
            raise ValueError(f"distance_method must be one of {DISTANCE_METHODS}")


@dataclass(frozen=True)
class TimelinessConfig:
    alpha1: float = 0.5
    alpha2: float = 0.5
    w_xi: int = DEFAULT_WINDOW

    def __post_init__(self):
        if self.w_xi <= 0:
            raise ValueError("timeliness window must be positive")


@dataclass(frozen=True)
class CriterionVector:
    closeness: float
    timeliness: float
    conciseness: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.closeness, self.timeliness, self.conciseness)


def frequency(flow: FlowList, other: str, t_from: int, t_to: int, direction: Direction) -> int:
    """Emails exchanged with ``other`` in the half-open window [t_from, t_to)."""
    if t_from > t_to:
        raise ValueError("t_from must not exceed t_to")
    return flow.count_between(other, direction, t_from, t_to)


def history_weight(f_t: int, f_f: int, cfg: ClosenessConfig) -> float:
    return math.exp(cfg.w1 * f_t + cfg.w2 * f_f)


def _level(directory: AddressDirectory, address: str) -> int:
    level = directory.level(address)
    if level is None:
        warnings.warn(f"insider {address} has no job level; using 1", stacklevel=3)
        return 1
    return level


def closeness(
    sender: str,
    candidate: str,
    t: int,
    flow: FlowList,
    graph: SocialGraph,
    directory: AddressDirectory,
    cfg: ClosenessConfig,
) -> float:
    """Frequency-weighted closeness of ``candidate`` as seen by ``sender``.

    Insider candidates are scored by the job-level ratio, outsiders by social
    distance in the interaction graph. ``flow`` is the sender's flow list.
    """
    if not directory.is_insider(sender):
        raise ValueError(f"closeness is defined for insider senders only ({sender})")
    lo = t - cfg.w_phi
    f_t = flow.count_between(candidate, Direction.SENT, lo, t)
    f_f = flow.count_between(candidate, Direction.RECEIVED, lo, t)
    gamma = history_weight(f_t, f_f, cfg)
    if directory.is_insider(candidate):
        return gamma * math.exp(_level(directory, candidate) / (2 * _level(directory, sender)))
    return gamma * social_distance(graph, sender, candidate, cfg.distance_method)


def timeliness(owner: str, candidate: str, t: int, flow: FlowList, cfg: TimelinessConfig) -> float:
    """Weighted reply and follow-up staleness, each normalised to [0, 1]."""
    w = cfg.w_xi
    last_recv = flow.last_before(candidate, Direction.RECEIVED, t)
    last_sent = flow.last_before(candidate, Direction.SENT, t)
    reply = 0.0 if last_recv is None else min(max(t - last_recv, 0), w) / w
    followup = 0.0 if last_sent is None else (t - max(t - w, last_sent)) / w
    return cfg.alpha1 * reply + cfg.alpha2 * min(max(followup, 0.0), 1.0)


def conciseness(email: EmailObject) -> float:
    if email.token_count == 0:
        return 0.0
    return 1.0 - email.stopword_count / email.token_count
