"""Ranking metrics, cumulative series and the non-stationarity coefficient."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import astuple, dataclass, fields
from typing import Iterable, Mapping, Sequence

import numpy as np

from .candidates import TruthRecord

TAU_FEATURES = (
    "insider_score",
    "outsider_score",
    "content_length",
    "effective_length_ratio",
    "receiving_time",
    "two_paths",
    "reply_rank",
)

STABILITY_THRESHOLD = 1.0


@dataclass(frozen=True)
class EvaluationRow:
    date: str
    user: str
    ranker: str
    loss: float
    ndcg: float
    n_candidates: int
    n_truth: int
    n_discovered: int
    split: str = "test"


SERIES_COLUMNS = tuple(f.name for f in fields(EvaluationRow))


def ndcg(pred: Mapping[str, int], truth: TruthRecord) -> float:
    """NDCG of a predicted order with linear relevance ``|truth| - true_rank``.

    ``pred`` maps each candidate to its predicted 0-based rank. True
    recipients missing from ``pred`` count toward the ideal DCG only.
    """
    if not truth:
        return 1.0
    n = len(truth)
    rel = {e: n - r for e, r in truth.ranks.items()}
    dcg = sum(rel.get(e, 0) / math.log2(k + 2) for e, k in pred.items())
    idcg = sum((n - k) / math.log2(k + 2) for k in range(n))
    return dcg / idcg


def correlation_matrix(x: np.ndarray) -> np.ndarray:
    """Pearson correlations; pairs involving a constant column are 0, diagonal 1."""
    x = np.asarray(x, dtype=float)
    centered = x - x.mean(axis=0)
    norm = np.sqrt((centered**2).sum(axis=0))
    ok = norm > 0
    out = np.zeros((x.shape[1], x.shape[1]))
    z = centered[:, ok] / norm[ok]
    out[np.ix_(ok, ok)] = np.clip(z.T @ z, -1.0, 1.0)
    np.fill_diagonal(out, 1.0)
    return out


def tau(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Frobenius distance between the two windows' correlation matrices."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] < 2 or b.shape[0] < 2:
        raise ValueError("tau needs two feature matrices with at least 2 rows each")
    if a.shape[1] != b.shape[1]:
        raise ValueError("feature matrices disagree on column count")
    d = correlation_matrix(a) - correlation_matrix(b)
    return float((d**2).sum())


def classify_stability(taus: Mapping[str, float], threshold: float = STABILITY_THRESHOLD) -> dict[str, list[str]]:
    parts: dict[str, list[str]] = {"stable": [], "unstable": []}
    for user in sorted(taus):
        parts["stable" if taus[user] < threshold else "unstable"].append(user)
    return parts


def cumulative_series(records: Iterable[EvaluationRow]) -> dict[str, list[tuple[str, float, float]]]:
    """Per ranker: (date, cumulative loss, NDCG summed over that date)."""
    daily_loss: dict[str, dict[str, float]] = defaultdict(lambda: defaultdict(float))
    daily_ndcg: dict[str, dict[str, float]] = defaultdict(lambda: defaultdict(float))
    for r in records:
        daily_loss[r.ranker][r.date] += r.loss
        daily_ndcg[r.ranker][r.date] += r.ndcg
    out = {}
    for ranker, by_date in daily_loss.items():
        running = 0.0
        rows = []
        for date in sorted(by_date):
            running += by_date[date]
            rows.append((date, running, daily_ndcg[ranker][date]))
        out[ranker] = rows
    return out


def average_losses(records: Iterable[EvaluationRow], split: str | None = None) -> dict[str, float]:
    sums: dict[str, float] = defaultdict(float)
    counts: dict[str, int] = defaultdict(int)
    for r in records:
        if split is None or r.split == split:
            sums[r.ranker] += r.loss
            counts[r.ranker] += 1
    return {k: sums[k] / counts[k] for k in sums}


def format_series_csv(records: Sequence[EvaluationRow]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SERIES_COLUMNS)
    for r in records:
        row = list(astuple(r))
        row[3] = repr(float(r.loss))
        row[4] = repr(float(r.ndcg))
        w.writerow(row)
    return out.getvalue()


def read_series_csv(text: str) -> list[EvaluationRow]:
    rows = []
    for d in csv.DictReader(io.StringIO(text)):
        rows.append(
            EvaluationRow(
                d["date"], d["user"], d["ranker"], float(d["loss"]), float(d["ndcg"]),
                int(d["n_candidates"]), int(d["n_truth"]), int(d["n_discovered"]), d["split"],
            )
        )
    return rows
