"""Directed send counts and the undirected interaction graph built from them."""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Iterable

from .email_stream import EmailObject

UNREACHABLE = math.inf

DISTANCE_METHODS = ("shortest", "two_paths")


@dataclass(frozen=True)
class GraphConfig:
    k1: int = 0
    k2: int = 0
    k3: int = 2

    def __post_init__(self):
        if min(self.k1, self.k2, self.k3) < 0:
            raise ValueError("graph thresholds must be non-negative")


class InteractionCounts:
    """Directed send counts n[a -> b]; absent pairs read as 0."""

    def __init__(self):
        self.counts: dict[tuple[str, str], int] = defaultdict(int)
        # unordered pairs touched since the last graph refresh
        self.dirty: set[tuple[str, str]] = set()

    def __getitem__(self, pair: tuple[str, str]) -> int:
        return self.counts.get(pair, 0)

    def __len__(self):
        return len(self.counts)

    def pairs(self) -> set[tuple[str, str]]:
        return {_key(a, b) for a, b in self.counts}


def _key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def apply_email(counts: InteractionCounts, email: EmailObject) -> InteractionCounts:
    """Count one send per (sender, recipient) pair; self-sends are ignored.

    Mutates and returns ``counts``.
    """
    for r in email.recipients:
        if r == email.sender:
            continue
        counts.counts[(email.sender, r)] += 1
        counts.dirty.add(_key(email.sender, r))
    return counts


def edge_rule(n_ij: int, n_ji: int, config: GraphConfig) -> bool:
    if n_ij + n_ji == 0 or n_ij + n_ji < config.k3:
        return False
    forward = n_ij >= config.k1 and n_ji >= config.k2
    backward = n_ji >= config.k1 and n_ij >= config.k2
    return forward or backward


class SocialGraph:
    def __init__(self, adjacency: dict[str, set[str]] | None = None):
        self.adjacency: dict[str, set[str]] = defaultdict(set)
        for a, nbrs in (adjacency or {}).items():
            for b in nbrs:
                self.add_edge(a, b)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[str, str]]) -> "SocialGraph":
        g = cls()
        for a, b in edges:
            g.add_edge(a, b)
        return g

    def add_edge(self, a: str, b: str) -> None:
        if a == b:
            return
        self.adjacency[a].add(b)
        self.adjacency[b].add(a)

    def neighbors(self, a: str) -> set[str]:
        return self.adjacency.get(a, set())

    def has_edge(self, a: str, b: str) -> bool:
        return b in self.adjacency.get(a, ())

    def edges(self) -> list[tuple[str, str]]:
        return sorted({_key(a, b) for a, nbrs in self.adjacency.items() for b in nbrs})

    def nodes(self) -> list[str]:
        return sorted(a for a, nbrs in self.adjacency.items() if nbrs)

    def to_csv(self) -> str:
        return "a,b\n" + "".join(f"{a},{b}\n" for a, b in self.edges())


def rebuild_edges(counts: InteractionCounts, config: GraphConfig) -> SocialGraph:
    """Evaluate the edge thresholds over every pair with traffic."""
    g = SocialGraph()
    for a, b in counts.pairs():
        if a != b and edge_rule(counts[(a, b)], counts[(b, a)], config):
            g.add_edge(a, b)
    return g


def refresh_edges(graph: SocialGraph, counts: InteractionCounts, config: GraphConfig) -> SocialGraph:
    """Incremental rebuild: re-check only pairs touched since the last call.

    Valid because counts only grow and the edge rule is monotone in them, so
    existing edges never disappear.
    """
    for a, b in counts.dirty:
        if edge_rule(counts[(a, b)], counts[(b, a)], config):
            graph.add_edge(a, b)
    counts.dirty.clear()
    return graph


def shortest_distance(graph: SocialGraph, a: str, b: str) -> float:
    """Hop count by breadth-first search; ``UNREACHABLE`` when disconnected."""
    if a == b:
        return 0
    seen = {a}
    frontier = deque([(a, 0)])
    while frontier:
        node, d = frontier.popleft()
        for nbr in graph.neighbors(node):
            if nbr == b:
                return d + 1
            if nbr not in seen:
                seen.add(nbr)
                frontier.append((nbr, d + 1))
    return UNREACHABLE


def two_path_count(graph: SocialGraph, a: str, b: str) -> int:
    if a == b:
        raise ValueError("two_path_count needs two distinct addresses")
    na, nb = graph.neighbors(a), graph.neighbors(b)
    if len(na) > len(nb):
        na, nb = nb, na
    return sum(1 for m in na if m in nb and m != a and m != b)


def social_distance(graph: SocialGraph, a: str, b: str, method: str = "two_paths") -> float:
    """Closeness-oriented distance: larger means socially closer for both methods."""
    if method == "two_paths":
        return 0.0 if a == b else float(two_path_count(graph, a, b))
    if method == "shortest":
        return 1.0 / (1.0 + shortest_distance(graph, a, b))
    raise ValueError(f"unknown distance method {method!r}")
