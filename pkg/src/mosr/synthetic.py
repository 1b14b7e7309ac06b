"""Synthetic email streams with a known, possibly switching, reply preference.

Every simulated user replies each morning to part of the candidate set,
in the order given by a fixed mixture over the ranker bank. The mixture
may switch on a given day. The generator replays the same online state
the pipeline uses, so the ordering it acts on is exactly what the rankers
see at that day boundary. Replies land in the stream, so the ground truth
can be recovered from the stream itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Mapping

import numpy as np

from .aggregation import DEFAULT_RANKERS
from .config import SIMULATION_KEYS, ConfigError, ExperimentConfig
from .email_stream import DAY, AddressDirectory, EmailObject
from .mrac import aggregate_rankings, mosr_rank

EPOCH_2000 = 946684800


def preference(**weights: float) -> tuple[float, ...]:
    """Build a simplex vector over the default bank from ranker-name keywords.

    Keys use underscores for the punctuation in ranker names, e.g.
    ``owa_2_5=0.7, timeline=0.3``.
    """
    names = [n.replace(":", "_").replace(".", "_") for n in DEFAULT_RANKERS]
    vec = [0.0] * len(names)
    for key, w in weights.items():
        vec[names.index(key)] = w
    return tuple(vec)


TIMELINE_DOMINATED = preference(timeline=0.6, single_timeliness=0.2, owa_1_0=0.2)
OWA25_DOMINATED = preference(owa_2_5=0.8, single_closeness=0.1, single_conciseness=0.1)


@dataclass(frozen=True)
class SyntheticConfig:
    n_users: int = 20
    n_days: int = 120
    regime_switch_day: int | None = None
    true_preferences: tuple[tuple[float, ...], ...] = (TIMELINE_DOMINATED, OWA25_DOMINATED)
    emails_per_user_day: int = 4
    noise: float = 0.1
    seed: int = 0
    n_colleagues: int = 30
    n_outsiders: int = 60
    contacts_per_user: int = 14
    reply_fraction: float = 0.6
    spontaneous_rate: float = 0.2
    background_rate: float = 0.3
    switch_fraction: float = 1.0
    start: int = EPOCH_2000

    def __post_init__(self):
        if min(self.n_users, self.n_days, self.emails_per_user_day) < 1:
            raise ValueError("n_users, n_days and emails_per_user_day must be positive")
        if not 0 <= self.noise < 1:
            raise ValueError("noise must be in [0, 1)")
        if not 0 <= self.switch_fraction <= 1:
            raise ValueError("switch_fraction must be in [0, 1]")
        if not 0 < self.reply_fraction <= 1:
            raise ValueError("reply_fraction must be in (0, 1]")
        if self.start % DAY:
            raise ValueError("start must fall on a UTC midnight")
        if not self.true_preferences:
            raise ValueError("need at least one preference vector")
        if self.regime_switch_day is not None and len(self.true_preferences) < 2:
            raise ValueError("a regime switch needs two preference vectors")
        for p in self.true_preferences:
            p = np.asarray(p, dtype=float)
            if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
                raise ValueError(f"preference {tuple(p)} is not on the simplex")


def parse_preferences(text: str) -> tuple[tuple[float, ...], ...]:
    """``"0.6,0,...;0,0.8,..."``: one comma vector per regime."""
    return tuple(tuple(float(x) for x in part.split(",")) for part in text.split(";") if part.strip())


def format_preferences(prefs) -> str:
    return ";".join(",".join(repr(float(x)) for x in p) for p in prefs)


def synthetic_config(flat: Mapping[str, str], base: SyntheticConfig | None = None) -> SyntheticConfig:
    """Apply ``synthetic.*`` keys from a flat config; other keys are ignored."""
    cfg = base or SyntheticConfig()
    changes = {}
    try:
        for key, value in flat.items():
            if not key.startswith("synthetic."):
                continue
            if key not in SIMULATION_KEYS:
                raise ConfigError(f"unknown config key {key}")
            name = key.split(".", 1)[1]
            conv = SIMULATION_KEYS[key]
            changes[name] = parse_preferences(value) if conv is None else conv(value)
        return replace(cfg, **changes)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def synthetic_flat(cfg: SyntheticConfig) -> dict[str, str]:
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "true_preferences":
            v = format_preferences(v)
        elif v is None:
            v = ""
        out[f"synthetic.{f.name}"] = str(v)
    return out


@dataclass(frozen=True)
class PreferenceSchedule:
    """Which preference vector each user follows on each day.

    ``switchers`` lists the users that move to regime 1 at ``switch_day``;
    everyone else keeps regime 0.
    """

    start: int
    switch_day: int | None
    preferences: tuple[tuple[float, ...], ...]
    switchers: frozenset[str] | None = None

    def regime(self, day: int, user: str | None = None) -> int:
        if self.switch_day is None or day < self.switch_day:
            return 0
        if user is not None and self.switchers is not None and user not in self.switchers:
            return 0
        return 1

    def preferences_for(self, day: int, user: str | None = None) -> np.ndarray:
        return np.asarray(self.preferences[self.regime(day, user)], dtype=float)

    def day_index(self, t: int) -> int:
        return (t - self.start) // DAY


@dataclass
class SyntheticStream:
    events: list[EmailObject]
    schedule: PreferenceSchedule
    directory: AddressDirectory
    users: list[str]
    outsiders: list[str] = field(default_factory=list)


def _zipf(n: int, rng: np.random.Generator) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1)
    rng.shuffle(w)
    return w / w.sum()


def _body(rng: np.random.Generator) -> tuple[int, int]:
    tokens = int(rng.integers(20, 400))
    return tokens, int(tokens * rng.uniform(0.15, 0.75))


def generate_synthetic_stream(config: SyntheticConfig, experiment: ExperimentConfig | None = None) -> SyntheticStream:
    # imported here: the pipeline module depends on the email model only
    from .pipeline import OnlineState

    experiment = experiment or ExperimentConfig()
    if any(len(p) != len(experiment.rankers) for p in config.true_preferences):
        raise ValueError("preference vectors must match the ranker bank size")
    rng = np.random.default_rng(config.seed)
    users = [f"user{i:02d}@corp.example" for i in range(config.n_users)]
    colleagues = [f"staff{i:02d}@corp.example" for i in range(config.n_colleagues)]
    outsiders = [f"contact{i:02d}@partner{i % 7}.example" for i in range(config.n_outsiders)]
    insiders = users + colleagues
    levels = {a: int(rng.integers(1, 6)) for a in insiders}
    directory = AddressDirectory(frozenset(insiders), levels)
    n_switch = int(round(config.switch_fraction * len(users)))
    switchers = frozenset(users[i] for i in rng.choice(len(users), size=n_switch, replace=False))
    schedule = PreferenceSchedule(
        config.start, config.regime_switch_day, tuple(map(tuple, config.true_preferences)), switchers
    )

    others = colleagues + outsiders
    pools = {}
    for u in users:
        idx = rng.choice(len(others), size=min(config.contacts_per_user, len(others)), replace=False)
        pools[u] = ([others[i] for i in idx], _zipf(len(idx), rng))
    ties = [(o, colleagues[i]) for o in outsiders for i in rng.choice(len(colleagues), size=3, replace=False)]

    state = OnlineState(directory, experiment)
    events: list[EmailObject] = []
    for d in range(config.n_days):
        t0 = config.start + d * DAY
        state.refresh_graph()
        day: list[tuple[int, int, EmailObject]] = []
        seq = 0

        def emit(sender, recipient, ts):
            nonlocal seq
            tokens, stops = _body(rng)
            day.append((int(ts), seq, EmailObject(sender, (recipient,), int(ts), tokens, stops)))
            seq += 1

        for u in users:
            snap = state.snapshot(u, t0)
            replied = set()
            if snap is not None:
                ranks = state.rank_all(snap)
                prefs = schedule.preferences_for(d, u)
                order = list(np.argsort(mosr_rank(aggregate_rankings(prefs, ranks)), kind="stable"))
                k = max(1, int(round(config.reply_fraction * len(order))))
                top = order[:k]
                if k >= 2 and rng.random() < config.noise:
                    j = int(rng.integers(k - 1))
                    top[j], top[j + 1] = top[j + 1], top[j]
                ts = t0 + 8 * 3600
                for pos in top:
                    ts += int(rng.integers(60, 900))
                    emit(u, snap.candidates[pos], ts)
                    replied.add(snap.candidates[pos])
            pool, weights = pools[u]
            if rng.random() < config.spontaneous_rate:
                fresh = [c for c in pool if c not in replied and (snap is None or c not in snap.candidates)]
                if fresh:
                    emit(u, fresh[int(rng.integers(len(fresh)))], t0 + 20 * 3600 + int(rng.integers(0, 3600)))
            for _ in range(config.emails_per_user_day):
                sender = pool[int(rng.choice(len(pool), p=weights))]
                emit(sender, u, t0 + int(rng.integers(7 * 3600, 19 * 3600)))
        for a, b in ties:
            if rng.random() < config.background_rate:
                if rng.random() < 0.5:
                    a, b = b, a
                emit(a, b, t0 + int(rng.integers(0, DAY)))

        day.sort(key=lambda x: (x[0], x[1]))
        for _, _, email in day:
            state.ingest(email)
            events.append(email)
    return SyntheticStream(events, schedule, directory, users, outsiders)
