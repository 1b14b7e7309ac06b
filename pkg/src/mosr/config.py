"""Flat ``section.key=value`` configuration.

Every tunable of an experiment is addressable by one dotted key, and the
resolved configuration can be written back out in the same format (the run
manifest stores it that way).
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .aggregation import DEFAULT_RANKERS, RankerSpec, parse_rankers
from .criteria import ClosenessConfig, TimelinessConfig
from .email_stream import DAY
from .mrac import DEFAULT_DELTA_D, DEFAULT_LAMBDA
from .social_graph import GraphConfig


class ConfigError(ValueError):
    pass


def parse_time(value: str) -> int:
    """Unix seconds, or an ISO date/datetime read as UTC."""
    value = value.strip()
    try:
        return int(value)
    except ValueError:
        pass
    try:
        parsed = dt.datetime.fromisoformat(value)
    except ValueError:
        raise ConfigError(f"not a timestamp or ISO date: {value!r}") from None
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=dt.timezone.utc)
    return int(parsed.timestamp())


@dataclass(frozen=True)
class ExperimentConfig:
    rankers: tuple[RankerSpec, ...] = field(default_factory=lambda: tuple(parse_rankers(DEFAULT_RANKERS)))
    lam: float = DEFAULT_LAMBDA
    delta_d: float = DEFAULT_DELTA_D
    init: str = "uniform"
    closeness: ClosenessConfig = ClosenessConfig()
    timeliness: TimelinessConfig = TimelinessConfig()
    graph: GraphConfig = GraphConfig()
    t_w: int = 3 * DAY
    truth_window: int = DAY
    test_start: int | None = None
    end: int | None = None
    users: tuple[str, ...] = ()

    def __post_init__(self):
        if self.t_w <= 0 or self.truth_window <= 0:
            raise ConfigError("windows must be positive")
        if not 0 < self.lam:
            raise ConfigError("mrac.lambda must be positive")
        if self.delta_d < 0:
            raise ConfigError("mrac.delta_d must be non-negative")
        if self.init != "uniform":
            raise ConfigError("mrac.init supports only 'uniform'")
        if self.test_start is not None and self.end is not None and self.test_start > self.end:
            raise ConfigError("eval.test_start must not be after eval.end")
        if not self.rankers:
            raise ConfigError("ranker bank is empty")

    @property
    def ranker_names(self) -> list[str]:
        return [r.name for r in self.rankers]


def _num(v: str) -> float:
    return float(v)


def _int(v: str) -> int:
    return int(float(v))


def _opt_time(v: str) -> int | None:
    return parse_time(v) if v.strip() else None


KEYS = {
    "rankers": None,
    "mrac.lambda": _num,
    "mrac.delta_d": _num,
    "mrac.init": str,
    "closeness.w1": _num,
    "closeness.w2": _num,
    "closeness.window_secs": _int,
    "closeness.distance_method": str,
    "timeliness.alpha1": _num,
    "timeliness.alpha2": _num,
    "timeliness.window_secs": _int,
    "graph.k1": _int,
    "graph.k2": _int,
    "graph.k3": _int,
    "candidates.window_secs": _int,
    "eval.truth_window_secs": _int,
    "eval.test_start": _opt_time,
    "eval.end": _opt_time,
    "eval.users": None,
}

def _opt_int(v: str) -> int | None:
    return _int(v) if v.strip() and v.strip().lower() != "none" else None


SIMULATION_KEYS = {
    "synthetic.n_users": _int,
    "synthetic.n_days": _int,
    "synthetic.regime_switch_day": _opt_int,
    "synthetic.true_preferences": None,
    "synthetic.switch_fraction": _num,
    "synthetic.emails_per_user_day": _int,
    "synthetic.noise": _num,
    "synthetic.seed": _int,
    "synthetic.n_colleagues": _int,
    "synthetic.n_outsiders": _int,
    "synthetic.contacts_per_user": _int,
    "synthetic.reply_fraction": _num,
    "synthetic.spontaneous_rate": _num,
    "synthetic.background_rate": _num,
    "synthetic.start": parse_time,
}


def read_flat(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"config line {lineno}: expected key=value")
        out[key.strip()] = value.strip()
    return out


def load_flat(path: str) -> dict[str, str]:
    """Read a key=value file, or the ``config`` block of a run manifest."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".json"):
        data = json.loads(text)
        return {k: str(v) for k, v in data.get("config", data).items()}
    return read_flat(text)


def parse_overrides(items: Iterable[str]) -> dict[str, str]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        out[key.strip()] = value.strip()
    return out


def build_config(flat: Mapping[str, str], base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Apply flat keys on top of ``base``. Unknown keys are rejected."""
    cfg = base or ExperimentConfig()
    unknown = [k for k in flat if k not in KEYS and k not in SIMULATION_KEYS]
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        v = {k: (KEYS[k](val) if KEYS[k] else val) for k, val in flat.items() if k in KEYS}
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    t_w = v.get("candidates.window_secs", cfg.t_w)
    # the criterion windows follow t_w unless set explicitly
    phi_default = t_w if cfg.closeness.w_phi == cfg.t_w else cfg.closeness.w_phi
    xi_default = t_w if cfg.timeliness.w_xi == cfg.t_w else cfg.timeliness.w_xi
    try:
        closeness = ClosenessConfig(
            w1=v.get("closeness.w1", cfg.closeness.w1),
            w2=v.get("closeness.w2", cfg.closeness.w2),
            w_phi=v.get("closeness.window_secs", phi_default),
            distance_method=v.get("closeness.distance_method", cfg.closeness.distance_method),
        )
        timeliness = TimelinessConfig(
            alpha1=v.get("timeliness.alpha1", cfg.timeliness.alpha1),
            alpha2=v.get("timeliness.alpha2", cfg.timeliness.alpha2),
            w_xi=v.get("timeliness.window_secs", xi_default),
        )
        graph = GraphConfig(
            k1=v.get("graph.k1", cfg.graph.k1),
            k2=v.get("graph.k2", cfg.graph.k2),
            k3=v.get("graph.k3", cfg.graph.k3),
        )
        rankers = tuple(parse_rankers(v["rankers"])) if "rankers" in v else cfg.rankers
        users = cfg.users
        if "eval.users" in v:
            users = tuple(u.strip() for u in v["eval.users"].split(",") if u.strip())
        return replace(
            cfg,
            rankers=rankers,
            lam=v.get("mrac.lambda", cfg.lam),
            delta_d=v.get("mrac.delta_d", cfg.delta_d),
            init=v.get("mrac.init", cfg.init),
            closeness=closeness,
            timeliness=timeliness,
            graph=graph,
            t_w=t_w,
            truth_window=v.get("eval.truth_window_secs", cfg.truth_window),
            test_start=v.get("eval.test_start", cfg.test_start),
            end=v.get("eval.end", cfg.end),
            users=users,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def to_flat(cfg: ExperimentConfig) -> dict[str, str]:
    return {
        "rankers": ",".join(cfg.ranker_names),
        "mrac.lambda": repr(cfg.lam),
        "mrac.delta_d": repr(cfg.delta_d),
        "mrac.init": cfg.init,
        "closeness.w1": repr(cfg.closeness.w1),
        "closeness.w2": repr(cfg.closeness.w2),
        "closeness.window_secs": str(cfg.closeness.w_phi),
        "closeness.distance_method": cfg.closeness.distance_method,
        "timeliness.alpha1": repr(cfg.timeliness.alpha1),
        "timeliness.alpha2": repr(cfg.timeliness.alpha2),
        "timeliness.window_secs": str(cfg.timeliness.w_xi),
        "graph.k1": str(cfg.graph.k1),
        "graph.k2": str(cfg.graph.k2),
        "graph.k3": str(cfg.graph.k3),
        "candidates.window_secs": str(cfg.t_w),
        "eval.truth_window_secs": str(cfg.truth_window),
        "eval.test_start": "" if cfg.test_start is None else str(cfg.test_start),
        "eval.end": "" if cfg.end is None else str(cfg.end),
        "eval.users": ",".join(cfg.users),
    }


def format_flat(flat: Mapping[str, str]) -> str:
    return "".join(f"{k}={flat[k]}\n" for k in flat)
