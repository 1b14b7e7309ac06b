"""Email event model, event-log I/O and per-address flow lists.

Message bodies never enter the data model: an email carries only its token
and stop-word counts. ``count_tokens`` turns raw text into those counts for
the optional preprocessing path.
"""

from __future__ import annotations

import bisect
import csv
import enum
import io
import logging
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import IO, Iterable, Sequence, Union

logger = logging.getLogger(__name__)

DAY = 86400

LOG_HEADER = ("sender", "recipients", "timestamp", "token_count", "stopword_count")
DIRECTORY_HEADER = ("address", "is_insider", "job_level")

Source = Union[bytes, str, os.PathLike, IO[bytes], IO[str]]


class DataError(ValueError):
    """Input data violates a format or consistency contract."""


class Direction(str, enum.Enum):
    SENT = "sent"
    RECEIVED = "received"


@dataclass(frozen=True)
class EmailObject:
    sender: str
    recipients: tuple[str, ...]
    timestamp: int
    token_count: int
    stopword_count: int

    def __post_init__(self):
        if not isinstance(self.recipients, tuple):
            object.__setattr__(self, "recipients", tuple(self.recipients))
        if not self.recipients:
            raise ValueError("email needs at least one recipient")
        if len(set(self.recipients)) != len(self.recipients):
            raise ValueError(f"duplicate recipient in {self.recipients!r}")
        if self.timestamp < 0:
            raise ValueError("timestamp must be non-negative")
        if self.token_count < 0 or self.stopword_count < 0:
            raise ValueError("counts must be non-negative")
        if self.stopword_count > self.token_count:
            raise ValueError("stopword_count exceeds token_count")


@dataclass(frozen=True)
class AddressDirectory:
    """Insider addresses and their (partial) job levels."""

    insider_set: frozenset[str] = frozenset()
    job_level: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "insider_set", frozenset(self.insider_set))
        for addr, level in self.job_level.items():
            if addr not in self.insider_set:
                raise DataError(f"{addr} has a job level but is not an insider")
            if level < 1:
                raise DataError(f"job level for {addr} must be >= 1, got {level}")

    def is_insider(self, address: str) -> bool:
        return address in self.insider_set

    def level(self, address: str) -> int | None:
        return self.job_level.get(address)


class FlowList:
    """Time-ordered emails sent or received by one address.

    Besides the raw entries, per-counterpart timestamp indexes are kept so
    window counts and last-contact lookups cost O(log n).
    """

    def __init__(self, owner: str):
        self.owner = owner
        self.entries: list[tuple[EmailObject, Direction]] = []
        self._times: dict[tuple[str, Direction], list[int]] = {}

    def append(self, email: EmailObject) -> None:
        if email.sender == self.owner:
            direction = Direction.SENT
            others = [r for r in email.recipients if r != self.owner]
        elif self.owner in email.recipients:
            direction = Direction.RECEIVED
            others = [email.sender]
        else:
            return
        if self.entries and email.timestamp < self.entries[-1][0].timestamp:
            raise ValueError("flow list entries must be appended in time order")
        self.entries.append((email, direction))
        for other in others:
            self._times.setdefault((other, direction), []).append(email.timestamp)

    def timestamps(self, other: str, direction: Direction) -> list[int]:
        return self._times.get((other, Direction(direction)), [])

    def count_between(self, other: str, direction: Direction, t_from: int, t_to: int) -> int:
        ts = self.timestamps(other, direction)
        return bisect.bisect_left(ts, t_to) - bisect.bisect_left(ts, t_from)

    def last_before(self, other: str, direction: Direction, t: int) -> int | None:
        ts = self.timestamps(other, direction)
        i = bisect.bisect_left(ts, t)
        return ts[i - 1] if i else None

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


@dataclass
class ParsedLog:
    events: list[EmailObject]
    errors: list[tuple[int, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def _read_text(source: Source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read().decode("utf-8")
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def _looks_like_header(fields: Sequence[str]) -> bool:
    return len(fields) >= 3 and not fields[2].strip().lstrip("-").isdigit()


def parse_email_log(source: Source) -> ParsedLog:
    """Parse the CSV event log.

    Bad records are skipped and listed in ``errors`` with their 1-based line
    number. Out-of-order timestamps are stable-sorted and produce a warning.
    """
    text = _read_text(source)
    events: list[EmailObject] = []
    result = ParsedLog(events)
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return result
    start = 1
    if not _looks_like_header(rows[0]):
        result.warnings.append("header line missing; first line parsed as data")
        start = 0
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if not row or all(not f.strip() for f in row):
            continue
        if len(row) != 5:
            result.errors.append((lineno, f"expected 5 fields, got {len(row)}"))
            continue
        sender, recips, ts, tokens, stops = (f.strip() for f in row)
        try:
            timestamp = int(ts)
        except ValueError:
            result.errors.append((lineno, f"non-numeric timestamp {ts!r}"))
            continue
        try:
            email = EmailObject(
                sender=sender,
                recipients=tuple(r.strip() for r in recips.split(";") if r.strip()),
                timestamp=timestamp,
                token_count=int(tokens),
                stopword_count=int(stops),
            )
        except ValueError as exc:
            result.errors.append((lineno, str(exc)))
            continue
        if not sender:
            result.errors.append((lineno, "empty sender"))
            continue
        events.append(email)
    if any(a.timestamp > b.timestamp for a, b in zip(events, events[1:])):
        events.sort(key=lambda e: e.timestamp)
        result.warnings.append("timestamps not monotone; events re-sorted")
    for msg in result.warnings:
        logger.warning(msg)
    return result


def format_email_log(events: Iterable[EmailObject]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(LOG_HEADER)
    for e in events:
        writer.writerow([e.sender, ";".join(e.recipients), e.timestamp, e.token_count, e.stopword_count])
    return out.getvalue()


def write_email_log(events: Iterable[EmailObject], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_email_log(events))


def parse_directory(source: Source) -> AddressDirectory:
    text = _read_text(source)
    insiders: set[str] = set()
    levels: dict[str, int] = {}
    rows = list(csv.reader(io.StringIO(text)))
    for lineno, row in enumerate(rows, start=1):
        if not row or (lineno == 1 and row[0].strip() == "address"):
            continue
        if len(row) != 3:
            raise DataError(f"directory line {lineno}: expected 3 fields, got {len(row)}")
        addr, flag, level = (f.strip() for f in row)
        if flag not in ("0", "1"):
            raise DataError(f"directory line {lineno}: is_insider must be 0 or 1")
        if flag == "1":
            insiders.add(addr)
        if level:
            try:
                levels[addr] = int(level)
            except ValueError:
                raise DataError(f"directory line {lineno}: bad job level {level!r}") from None
    return AddressDirectory(frozenset(insiders), levels)


def format_directory(directory: AddressDirectory, outsiders: Iterable[str] = ()) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(DIRECTORY_HEADER)
    for addr in sorted(directory.insider_set):
        level = directory.level(addr)
        writer.writerow([addr, 1, "" if level is None else level])
    for addr in sorted(set(outsiders) - directory.insider_set):
        writer.writerow([addr, 0, ""])
    return out.getvalue()


def build_flow_list(events: Iterable[EmailObject], owner: str) -> FlowList:
    flow = FlowList(owner)
    for email in events:
        flow.append(email)
    return flow


_TOKEN = re.compile(r"[a-z0-9']+")


def load_stopwords(path: str | os.PathLike | None = None) -> frozenset[str]:
    """Read a one-token-per-line stop-word list; default is the bundled list."""
    if path is None:
        text = resources.files("mosr").joinpath("stopwords.txt").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip() and not w.startswith("#"))


def count_tokens(text: str, stopwords: frozenset[str]) -> tuple[int, int]:
    tokens = _TOKEN.findall(text.lower())
    return len(tokens), sum(1 for t in tokens if t in stopwords)


def preprocess_raw(source: Source, stopwords: frozenset[str]) -> ParsedLog:
    """Convert ``sender,recipients,timestamp,body`` rows into count-only events.

    The body column is discarded once counted.
    """
    text = _read_text(source)
    rows = list(csv.reader(io.StringIO(text)))
    lines = [LOG_HEADER]
    errors = []
    for lineno, row in enumerate(rows, start=1):
        if lineno == 1 and _looks_like_header(row):
            continue
        if len(row) != 4:
            errors.append((lineno, f"expected 4 fields, got {len(row)}"))
            continue
        tokens, stops = count_tokens(row[3], stopwords)
        lines.append((row[0], row[1], row[2], str(tokens), str(stops)))
    out = io.StringIO()
    csv.writer(out, lineterminator="\n").writerows(lines)
    parsed = parse_email_log(out.getvalue().encode("utf-8"))
    parsed.errors[:0] = errors
    return parsed
