"""Day-by-day replay of an email stream through the ranker bank and MOSR.

The replay is strictly online: at each UTC day boundary the graph is
refreshed, each user's candidate set is scored from state built out of
earlier events only, and the day's emails are applied afterwards. Ground
truth (the user's actual sends during the day) is read from a separate
index and used only for scoring and adaptation.
"""

from __future__ import annotations

import datetime as dt
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .aggregation import ScoreSnapshot, apply_ranker, normalize_snapshot, parse_rankers
from .candidates import CandidateSet, OutgoingIndex, TruthRecord, active_candidates, on_email
from .config import ConfigError, ExperimentConfig, build_config
from .criteria import closeness, conciseness, timeliness
from .email_stream import DAY, AddressDirectory, DataError, EmailObject, FlowList
from .evaluation import EvaluationRow, average_losses, ndcg, tau
from .mrac import MOSRState, mosr_step, rank_map
from .social_graph import InteractionCounts, SocialGraph, apply_email, refresh_edges, two_path_count

logger = logging.getLogger(__name__)

MOSR = "mosr"


def day_of(t: int) -> int:
    return t // DAY


def iso_date(t: int) -> str:
    return dt.datetime.fromtimestamp(t, dt.timezone.utc).date().isoformat()


@dataclass
class Snapshot:
    user: str
    t: int
    raw: ScoreSnapshot
    normalized: ScoreSnapshot
    ages: np.ndarray  # seconds since each candidate's oldest live trigger

    @property
    def candidates(self) -> list[str]:
        return self.raw.candidates

    def __len__(self):
        return len(self.raw)


class OnlineState:
    """Counts, graph, flow lists and candidate sets for one stream replay."""

    def __init__(self, directory: AddressDirectory, config: ExperimentConfig):
        self.directory = directory
        self.config = config
        self.counts = InteractionCounts()
        self.graph = SocialGraph()
        self.flows: dict[str, FlowList] = {}
        self.candidates: dict[str, CandidateSet] = {}
        self.last_t = -1

    def ingest(self, email: EmailObject) -> None:
        if email.timestamp < self.last_t:
            raise ValueError("events must be ingested in time order")
        self.last_t = email.timestamp
        apply_email(self.counts, email)
        for addr in dict.fromkeys((email.sender, *email.recipients)):
            if self.directory.is_insider(addr):
                self.flows.setdefault(addr, FlowList(addr)).append(email)
        on_email(self.candidates, email, self.config.t_w)

    def refresh_graph(self) -> None:
        refresh_edges(self.graph, self.counts, self.config.graph)

    def flow(self, user: str) -> FlowList:
        return self.flows.get(user) or FlowList(user)

    def snapshot(self, user: str, t: int) -> Snapshot | None:
        cset = self.candidates.get(user)
        if cset is None:
            return None
        cands = active_candidates(cset, t)
        if not cands:
            return None
        live: dict[str, list] = {}
        for e in cset.live(t):
            live.setdefault(e.candidate, []).append(e)
        flow = self.flow(user)
        cfg = self.config
        rows, ages = [], []
        for c in cands:
            entries = live[c]
            latest = max(entries, key=lambda e: e.source_timestamp)
            rows.append(
                (
                    closeness(user, c, t, flow, self.graph, self.directory, cfg.closeness),
                    timeliness(user, c, t, flow, cfg.timeliness),
                    conciseness(latest.source),
                )
            )
            ages.append(t - min(e.source_timestamp for e in entries))
        raw = ScoreSnapshot(cands, np.array(rows))
        return Snapshot(user, t, raw, normalize_snapshot(raw), np.array(ages, dtype=float))

    def rank_all(self, snap: Snapshot) -> list[np.ndarray]:
        return [apply_ranker(spec, snap.normalized, snap.ages) for spec in self.config.rankers]

    def receipt_features(self, user: str, email: EmailObject) -> list[float]:
        """Six of the seven drift features for ``email`` arriving at ``user``.

        Evaluated before the email is applied; the reply rank is filled in
        after the replay.
        """
        s, t = email.sender, email.timestamp
        flow = self.flow(user)
        score = closeness(user, s, t, flow, self.graph, self.directory, self.config.closeness)
        insider = self.directory.is_insider(s)
        return [
            score if insider else 0.0,
            0.0 if insider else score,
            float(email.token_count),
            conciseness(email),
            float(t % DAY),
            float(two_path_count(self.graph, user, s)),
        ]


@dataclass
class Receipt:
    user: str
    t: int
    sender: str
    features: list[float]


@dataclass
class ExperimentResult:
    series: list[EvaluationRow]
    weights: dict[str, np.ndarray]
    ranker_names: list[str]
    trajectory: dict[str, list[tuple[int, np.ndarray]]] = field(default_factory=dict)
    receipts: list[Receipt] = field(default_factory=list)

    def average_losses(self, split: str | None = "test") -> dict[str, float]:
        return average_losses(self.series, split)

    def weights_at(self, user: str, t: int) -> np.ndarray | None:
        """Mixture weights in force at time ``t`` (after all earlier updates)."""
        theta = None
        for when, w in self.trajectory.get(user, []):
            if when > t:
                break
            theta = w
        return theta

    def feature_matrix(self, t_from: int, t_to: int, user: str | None = None) -> np.ndarray:
        rows = [r.features for r in self.receipts if t_from <= r.t < t_to and (user is None or r.user == user)]
        return np.array(rows, dtype=float).reshape(-1, 7)


def _eval_users(directory: AddressDirectory, config: ExperimentConfig) -> list[str]:
    return sorted(config.users) if config.users else sorted(directory.insider_set)


def check_directory(directory: AddressDirectory, events: Sequence[EmailObject]) -> None:
    for addr, level in directory.job_level.items():
        if addr not in directory.insider_set or level < 1:
            raise DataError(f"directory entry {addr} is inconsistent (level {level})")
    if events and not directory.insider_set:
        raise DataError("directory lists no insiders; nothing to rank")


def run_experiment(
    stream: Sequence[EmailObject],
    directory: AddressDirectory,
    config: ExperimentConfig | None = None,
    *,
    collect_features: bool = False,
    track_weights: bool = False,
) -> ExperimentResult:
    config = config or ExperimentConfig()
    check_directory(directory, stream)
    events = [e for e in stream if config.end is None or e.timestamp < config.end]
    if any(a.timestamp > b.timestamp for a, b in zip(events, events[1:])):
        raise DataError("stream is not time-ordered")
    names = config.ranker_names
    n = len(names)
    users = _eval_users(directory, config)
    user_set = set(users)
    state = OnlineState(directory, config)
    index = OutgoingIndex(events)
    mosr_states: dict[str, MOSRState] = {}
    result = ExperimentResult([], {}, names)
    if not events:
        return result

    i = 0
    for day in range(day_of(events[0].timestamp), day_of(events[-1].timestamp) + 1):
        t0 = day * DAY
        state.refresh_graph()
        split = "test" if config.test_start is None or t0 >= config.test_start else "train"
        date = iso_date(t0)
        for user in users:
            snap = state.snapshot(user, t0)
            if snap is None:
                continue
            truth = index.truth(user, t0, config.truth_window)
            if not truth:
                continue
            ms = mosr_states.get(user) or MOSRState.initial(n, config.lam, config.delta_d)
            ranks = state.rank_all(snap)
            mosr_ranks, rec, mosr_states[user] = mosr_step(ms, snap.candidates, ranks, truth)
            found = rec.discovered
            for name, y, loss in zip(names, ranks, rec.per_ranker):
                result.series.append(
                    EvaluationRow(date, user, name, float(loss), ndcg(rank_map(snap.candidates, y), truth),
                                  len(snap), len(truth), found, split)
                )
            result.series.append(
                EvaluationRow(date, user, MOSR, rec.mosr, ndcg(rank_map(snap.candidates, mosr_ranks), truth),
                              len(snap), len(truth), found, split)
            )
            if track_weights:
                result.trajectory.setdefault(user, []).append((t0, mosr_states[user].theta))
        while i < len(events) and day_of(events[i].timestamp) == day:
            e = events[i]
            if collect_features:
                for u in e.recipients:
                    if u in user_set and u != e.sender:
                        result.receipts.append(Receipt(u, e.timestamp, e.sender, state.receipt_features(u, e)))
            state.ingest(e)
            i += 1

    if collect_features:
        _attach_reply_ranks(result.receipts, index, config)
    result.weights = {u: s.theta for u, s in mosr_states.items()}
    return result


def _attach_reply_ranks(receipts: list[Receipt], index: OutgoingIndex, config: ExperimentConfig) -> None:
    for r in receipts:
        sent = index.first_send_to(r.user, r.sender, r.t + 1, r.t + config.t_w + 1)
        if sent is not None:
            truth = index.truth(r.user, sent - sent % DAY, config.truth_window)
            rank = truth.ranks.get(r.sender, len(truth))
        else:
            rank = len(index.truth(r.user, (day_of(r.t) + 1) * DAY, config.truth_window))
        r.features.append(float(rank))


def tau_table(result: ExperimentResult, window_a: tuple[int, int], window_b: tuple[int, int]) -> list[tuple[str, float]]:
    """Per-user drift coefficient between two time windows, plus a pooled row ``*``."""
    out = []
    users = sorted({r.user for r in result.receipts})
    for u in users:
        a = result.feature_matrix(*window_a, user=u)
        b = result.feature_matrix(*window_b, user=u)
        if len(a) >= 2 and len(b) >= 2:
            out.append((u, tau(a, b)))
    a, b = result.feature_matrix(*window_a), result.feature_matrix(*window_b)
    if len(a) >= 2 and len(b) >= 2:
        out.append(("*", tau(a, b)))
    return out


class OnlineRanker:
    """Event-at-a-time front end: apply an email, then re-rank and adapt for
    each insider recipient.

    Used for latency measurements. Truth for adaptation comes from an
    optional ``OutgoingIndex``; without one the mixture stays put.
    """

    def __init__(self, directory: AddressDirectory, config: ExperimentConfig | None = None,
                 truth_index: OutgoingIndex | None = None):
        self.config = config or ExperimentConfig()
        self.state = OnlineState(directory, self.config)
        self.index = truth_index
        self.mosr: dict[str, MOSRState] = {}
        self._day: int | None = None

    def observe(self, email: EmailObject) -> None:
        day = day_of(email.timestamp)
        if day != self._day:
            self.state.refresh_graph()
            self._day = day
        self.state.ingest(email)

    def rerank(self, user: str, t: int) -> list[str]:
        snap = self.state.snapshot(user, t)
        if snap is None:
            return []
        ranks = self.state.rank_all(snap)
        cfg = self.config
        ms = self.mosr.get(user) or MOSRState.initial(len(ranks), cfg.lam, cfg.delta_d)
        truth = self.index.truth(user, t, cfg.truth_window) if self.index else TruthRecord(user, t, ())
        mosr_ranks, _, self.mosr[user] = mosr_step(ms, snap.candidates, ranks, truth)
        order = np.argsort(mosr_ranks, kind="stable")
        return [snap.candidates[k] for k in order]

    def step(self, email: EmailObject) -> float:
        """Process one event; returns the wall time it took in seconds."""
        start = time.perf_counter()
        self.observe(email)
        for u in email.recipients:
            if u != email.sender and self.state.directory.is_insider(u):
                self.rerank(u, email.timestamp + 1)
        return time.perf_counter() - start


# sweep -------------------------------------------------------------------

GRID_ALIASES = {
    "lambda": "mrac.lambda",
    "delta_d": "mrac.delta_d",
    "distance_method": "closeness.distance_method",
    "distance": "closeness.distance_method",
}


def _with_alphas(config: ExperimentConfig, alphas: str) -> ExperimentConfig:
    new = [float(a) for a in alphas.replace("|", ":").split(":") if a]
    others = [r for r in config.rankers if r.kind != "owa"]
    owa = parse_rankers([f"owa:{a}" for a in new])
    return replace(config, rankers=tuple(owa + others))


def grid_points(grid: Mapping[str, Sequence[str]]) -> list[dict[str, str]]:
    keys = list(grid)
    return [dict(zip(keys, values)) for values in product(*(grid[k] for k in keys))]


def config_for_point(base: ExperimentConfig, point: Mapping[str, str]) -> ExperimentConfig:
    cfg = base
    flat = {}
    for key, value in point.items():
        if key in ("alpha", "alphas"):
            cfg = _with_alphas(cfg, value)
        else:
            flat[GRID_ALIASES.get(key, key)] = value
    return build_config(flat, cfg)


def sweep(
    stream: Sequence[EmailObject],
    directory: AddressDirectory,
    base: ExperimentConfig,
    grid: Mapping[str, Sequence[str]],
) -> list[dict[str, object]]:
    """One replay per grid point; each row holds the point and per-ranker average loss."""
    if not grid or any(not v for v in grid.values()):
        raise ConfigError("sweep grid must have at least one value per key")
    rows = []
    for point in grid_points(grid):
        cfg = config_for_point(base, point)
        avg = run_experiment(stream, directory, cfg).average_losses()
        rows.append({**point, **avg})
    return rows


# robustness --------------------------------------------------------------


@dataclass
class RobustnessResult:
    samples: list[dict[str, float]]

    def rankers(self) -> list[str]:
        return list(self.samples[0]) if self.samples else []

    def mean(self) -> dict[str, float]:
        return {k: float(np.mean([s.get(k, np.nan) for s in self.samples])) for k in self.rankers()}

    def variance(self) -> dict[str, float]:
        ddof = 1 if len(self.samples) > 1 else 0
        return {k: float(np.var([s.get(k, np.nan) for s in self.samples], ddof=ddof)) for k in self.rankers()}


def subsample(stream: Sequence[EmailObject], keep_rate: float, seed: int, n_samples: int) -> list[list[EmailObject]]:
    if not 0 < keep_rate <= 1:
        raise ValueError("keep_rate must be in (0, 1]")
    out = []
    for child in np.random.SeedSequence(seed).spawn(n_samples):
        mask = np.random.default_rng(child).random(len(stream)) < keep_rate
        out.append([e for e, keep in zip(stream, mask) if keep])
    return out


def _average_for(args) -> dict[str, float]:
    stream, directory, config = args
    return run_experiment(stream, directory, config).average_losses()


def robustness_run(
    stream: Sequence[EmailObject],
    directory: AddressDirectory,
    config: ExperimentConfig,
    keep_rate: float,
    n_samples: int,
    seed: int,
    threads: int = 1,
) -> RobustnessResult:
    """Re-run the whole replay on Bernoulli(keep_rate) subsamples of the stream."""
    jobs = [(s, directory, config) for s in subsample(stream, keep_rate, seed, n_samples)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(_average_for, jobs))
    else:
        samples = [_average_for(j) for j in jobs]
    return RobustnessResult(samples)
