"""Candidate-set lifecycle and ground-truth extraction.

Two rules feed a user's candidate set: senders of unanswered inbox emails,
and recipients of the user's own emails that got no response (from the next
day on). Both expire ``t_w`` seconds after the triggering email and are
dropped as soon as the obligation is met.
"""

from __future__ import annotations

import bisect
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .email_stream import DAY, EmailObject

UNANSWERED = "unanswered"
FOLLOWUP = "followup"


@dataclass(frozen=True)
class CandidateEntry:
    candidate: str
    reason: str
    source_timestamp: int
    activates_at: int
    expires_at: int
    source: EmailObject | None = field(default=None, compare=False, repr=False)

    def live_at(self, t: int) -> bool:
        return self.activates_at <= t < self.expires_at


class CandidateSet:
    def __init__(self, owner: str):
        self.owner = owner
        self.entries: dict[tuple[str, str], CandidateEntry] = {}

    def add(self, entry: CandidateEntry) -> None:
        # a newer trigger replaces the entry for the same (candidate, reason)
        self.entries[(entry.candidate, entry.reason)] = entry

    def discharge(self, candidate: str, before: int, reasons: Sequence[str] = (UNANSWERED, FOLLOWUP)) -> None:
        for reason in reasons:
            e = self.entries.get((candidate, reason))
            if e is not None and e.source_timestamp < before:
                del self.entries[(candidate, reason)]

    def prune(self, t: int) -> None:
        """Drop entries that have expired by ``t``."""
        for key in [k for k, e in self.entries.items() if e.expires_at <= t]:
            del self.entries[key]

    def live(self, t: int) -> list[CandidateEntry]:
        return [e for e in self.entries.values() if e.live_at(t)]

    def __len__(self):
        return len(self.entries)


def on_email(state: dict[str, CandidateSet], email: EmailObject, t_w: int) -> dict[str, CandidateSet]:
    """Apply one email to every affected candidate set (mutates ``state``)."""
    s, t = email.sender, email.timestamp
    sender_set = state.setdefault(s, CandidateSet(s))
    sender_set.prune(t)
    for u in email.recipients:
        if u == s:
            continue
        recipient_set = state.setdefault(u, CandidateSet(u))
        recipient_set.prune(t)
        # s has now written to u: its own obligations toward u are met,
        # and u's pending follow-up on s got its answer
        sender_set.discharge(u, t)
        recipient_set.discharge(s, t, reasons=(FOLLOWUP,))
        recipient_set.add(CandidateEntry(s, UNANSWERED, t, t, t + t_w, email))
        sender_set.add(CandidateEntry(u, FOLLOWUP, t, min(t + DAY, t + t_w), t + t_w, email))
    return state


def active_candidates(cset: CandidateSet, t: int) -> list[str]:
    """Live candidates, each once, by earliest activation then address."""
    first: dict[str, int] = {}
    for e in cset.live(t):
        if e.candidate not in first or e.activates_at < first[e.candidate]:
            first[e.candidate] = e.activates_at
    return sorted(first, key=lambda c: (first[c], c))


@dataclass(frozen=True)
class TruthRecord:
    user: str
    t: int
    true_set: tuple[str, ...] = ()

    @property
    def ranks(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.true_set)}

    def __bool__(self):
        return bool(self.true_set)

    def __len__(self):
        return len(self.true_set)


class OutgoingIndex:
    """Per-user outgoing emails sorted by time, for truth lookups."""

    def __init__(self, events: Iterable[EmailObject]):
        self._times: dict[str, list[int]] = defaultdict(list)
        self._emails: dict[str, list[EmailObject]] = defaultdict(list)
        for e in events:
            self._times[e.sender].append(e.timestamp)
            self._emails[e.sender].append(e)

    def sends(self, user: str, t_from: int, t_to: int) -> list[EmailObject]:
        ts = self._times.get(user, [])
        lo, hi = bisect.bisect_left(ts, t_from), bisect.bisect_left(ts, t_to)
        return self._emails[user][lo:hi]

    def truth(self, user: str, t: int, window: int) -> TruthRecord:
        seen: dict[str, None] = {}
        for e in self.sends(user, t, t + window):
            for r in e.recipients:
                if r != user:
                    seen.setdefault(r, None)
        return TruthRecord(user, t, tuple(seen))

    def first_send_to(self, user: str, other: str, t_from: int, t_to: int) -> int | None:
        for e in self.sends(user, t_from, t_to):
            if other in e.recipients:
                return e.timestamp
        return None


def extract_truth(stream: Sequence[EmailObject], user: str, t: int, t_w: int) -> TruthRecord:
    """Distinct first-contact recipients of ``user`` in [t, t + t_w), by send time."""
    return OutgoingIndex(e for e in stream if e.sender == user).truth(user, t, t_w)


def coverage(candidates: Sequence[str], truth: TruthRecord) -> float:
    """Share of the true set missing from the candidate set."""
    if not truth:
        return 0.0
    q = set(candidates)
    return sum(1 for c in truth.true_set if c not in q) / len(truth)
