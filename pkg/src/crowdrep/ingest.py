"""Parsing of raw evaluation logs into canonical :class:`Evaluation` records.

Three input layouts are understood:

* ``wikilog``: the 8-column adminship election table (election close,
  nominator, nominee, election status, voter id, voter name, vote, vote time),
  tab or comma separated.
* ``generic``: CSV with header ``evaluator,worker,value,timestamp,credit``.
* ``snap``: the block format of the public SNAP ``wikiElec`` dump
  (``E``/``T``/``U``/``N``/``V`` lines), converted on the fly into the same
  rows as ``wikilog``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Iterable, Optional, TextIO

log = logging.getLogger(__name__)

WIKI_FIELDS = (
    "election_close",
    "nominator",
    "nominee",
    "election_status",
    "voter_id",
    "voter_name",
    "vote",
    "vote_time",
)
GENERIC_HEADER = ("evaluator", "worker", "value", "timestamp", "credit")

# vote -> evaluation value; affine map {-1, 0, 1} -> {1, 2, 3}
VOTE_OFFSET = 2
WIKI_SCALE_MAX = 3.0

_DAYS_PER_YEAR = 365.2425
INTERVAL_ALIASES = {
    "day": timedelta(days=1),
    "week": timedelta(weeks=1),
    "month": timedelta(days=_DAYS_PER_YEAR / 12),
    "quarter": timedelta(days=_DAYS_PER_YEAR / 4),
    "half-year": timedelta(days=_DAYS_PER_YEAR / 2),
    "year": timedelta(days=_DAYS_PER_YEAR),
}
_DURATION_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*([dwh])\s*$")


class IngestError(ValueError):
    """Raised for unusable input (bad header, bad interval, timestamp before epoch)."""


@dataclass(frozen=True, slots=True)
class Evaluation:
    evaluator: str
    worker: str
    value: float
    timestamp: datetime
    time_label: int
    credit: float = 1.0


@dataclass(frozen=True, slots=True)
class RawWikiVote:
    election_close: datetime
    nominator: str
    nominee: str
    election_status: int
    voter_id: int
    voter_name: str
    vote: int
    vote_time: datetime


@dataclass
class IntervalScheme:
    """Fixed-width time intervals numbered from 1.

    ``epoch=None`` means "derive from the data": the earliest ingested
    timestamp truncated to the start of its day.
    """

    width: timedelta
    epoch: Optional[datetime] = None

    def __post_init__(self):
        if self.width <= timedelta(0):
            raise IngestError("interval width must be positive")

    def resolved(self, timestamps: Iterable[datetime]) -> "IntervalScheme":
        if self.epoch is not None:
            return self
        first = min(timestamps, default=None)
        if first is None:
            return self
        return IntervalScheme(self.width, first.replace(hour=0, minute=0, second=0, microsecond=0))


@dataclass
class RejectedRow:
    line: int
    reason: str


@dataclass
class IngestResult:
    evaluations: list[Evaluation]
    scheme: IntervalScheme
    rejected: list[RejectedRow] = field(default_factory=list)
    n_rows: int = 0

    @property
    def n_rejected(self) -> int:
        return len(self.rejected)


def parse_interval(spec: str) -> timedelta:
    """Interval width from an alias (``half-year``) or a duration like ``30d``/``2w``/``12h``."""
    spec = spec.strip().lower()
    if spec in INTERVAL_ALIASES:
        return INTERVAL_ALIASES[spec]
    m = _DURATION_RE.match(spec)
    if not m:
        raise IngestError(f"unrecognised interval {spec!r}")
    amount, unit = float(m.group(1)), m.group(2)
    width = {"d": timedelta(days=amount), "w": timedelta(weeks=amount), "h": timedelta(hours=amount)}[unit]
    if width <= timedelta(0):
        raise IngestError(f"interval must be positive: {spec!r}")
    return width


def parse_timestamp(text: str) -> datetime:
    """ISO-8601 or ``YYYY-MM-DD HH:MM:SS``; timezone-aware values are converted to naive UTC."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is not None:
        ts = ts.replace(tzinfo=None) - ts.utcoffset()
    return ts


def label_of(timestamp: datetime, scheme: IntervalScheme) -> int:
    if scheme.epoch is None:
        raise IngestError("interval scheme has no epoch")
    delta = timestamp - scheme.epoch
    if delta < timedelta(0):
        raise IngestError(f"timestamp {timestamp} precedes epoch {scheme.epoch}")
    # integer microsecond arithmetic keeps the floor exact
    return 1 + _micros(delta) // _micros(scheme.width)


def _micros(d: timedelta) -> int:
    return (d.days * 86400 + d.seconds) * 1_000_000 + d.microseconds


def _split(line: str, dialect: str) -> list[str]:
    if dialect == "tab":
        return [c.strip() for c in line.rstrip("\r\n").split("\t")]
    if dialect == "comma":
        return [c.strip() for c in next(csv.reader([line]))]
    raise IngestError(f"unknown dialect {dialect!r}")


def _looks_like_header(cells: list[str]) -> bool:
    return bool(cells) and cells[0].strip().lower().replace(" ", "_") in ("election_close", "election_closing_time")


def read_wikilog_rows(stream: TextIO, dialect: str = "tab"):
    """Yield ``(line_no, RawWikiVote | RejectedRow)`` for each non-blank line."""
    for line_no, line in enumerate(stream, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cells = _split(line, dialect)
        if line_no == 1 and _looks_like_header(cells):
            continue
        if len(cells) != len(WIKI_FIELDS):
            yield line_no, RejectedRow(line_no, f"expected {len(WIKI_FIELDS)} fields, got {len(cells)}")
            continue
        try:
            close = parse_timestamp(cells[0])
            vote_time = parse_timestamp(cells[7])
        except ValueError as exc:
            yield line_no, RejectedRow(line_no, f"malformed timestamp: {exc}")
            continue
        try:
            status = int(cells[3])
            voter_id = int(cells[4])
            vote = int(cells[6])
        except ValueError as exc:
            yield line_no, RejectedRow(line_no, f"malformed integer field: {exc}")
            continue
        if vote not in (-1, 0, 1):
            yield line_no, RejectedRow(line_no, f"vote {vote} outside {{-1,0,1}}")
            continue
        if status not in (0, 1):
            yield line_no, RejectedRow(line_no, f"election status {status} outside {{0,1}}")
            continue
        yield line_no, RawWikiVote(close, cells[1], cells[2], status, voter_id, cells[5], vote, vote_time)


def _finish(pending, scheme: IntervalScheme, rejected, n_rows) -> IngestResult:
    """Attach time labels once the epoch is known."""
    scheme = scheme.resolved(p[3] for p in pending)
    out = []
    for line_no, evaluator, worker, ts, value, credit in pending:
        try:
            lab = label_of(ts, scheme)
        except IngestError as exc:
            rejected.append(RejectedRow(line_no, str(exc)))
            continue
        out.append(Evaluation(evaluator, worker, value, ts, lab, credit))
    if not out and not rejected:
        log.warning("no records in input")
    return IngestResult(out, scheme, rejected, n_rows)


def parse_wikilog(
    stream: TextIO,
    scheme: IntervalScheme,
    dialect: str = "tab",
    exclude_self_votes: bool = False,
) -> IngestResult:
    """One evaluation per vote: voter evaluates nominee with value ``vote + 2`` and credit 1."""
    pending, rejected, n_rows = [], [], 0
    for line_no, rec in read_wikilog_rows(stream, dialect):
        n_rows += 1
        if isinstance(rec, RejectedRow):
            rejected.append(rec)
            continue
        if exclude_self_votes and rec.voter_name == rec.nominee:
            continue
        pending.append((line_no, rec.voter_name, rec.nominee, rec.vote_time, float(rec.vote + VOTE_OFFSET), 1.0))
    return _finish(pending, scheme, rejected, n_rows)


def snap_to_wikilog(stream: TextIO, out: TextIO) -> int:
    """Convert the SNAP ``wikiElec`` block format into tab-separated wikilog rows.

    ``V`` lines are ``V <vote> <voter_id> <YYYY-MM-DD> <HH:MM:SS> <voter_name>``.
    Votes with missing times (the dump has a few) are skipped. Returns rows written.
    """
    close = nominator = nominee = None
    status = None
    written = 0
    for line in stream:
        parts = line.split()
        if not parts:
            continue
        tag = parts[0]
        if tag == "E":
            status = parts[1]
        elif tag == "T":
            close = " ".join(parts[1:3])
        elif tag == "U":
            nominee = parts[2] if len(parts) > 2 else parts[1]
        elif tag == "N":
            nominator = parts[2] if len(parts) > 2 else parts[1]
        elif tag == "V" and len(parts) >= 6:
            vote, voter_id, date, clock, name = parts[1], parts[2], parts[3], parts[4], parts[5]
            if not re.match(r"\d{4}-\d{2}-\d{2}$", date):
                continue
            out.write("\t".join([close or "", nominator or "", nominee or "", status or "0",
                                 voter_id, name, vote, f"{date} {clock}"]) + "\n")
            written += 1
    return written


def parse_snap(stream: TextIO, scheme: IntervalScheme, exclude_self_votes: bool = False) -> IngestResult:
    buf = io.StringIO()
    snap_to_wikilog(stream, buf)
    buf.seek(0)
    return parse_wikilog(buf, scheme, "tab", exclude_self_votes)


def parse_generic(stream: TextIO, scheme: IntervalScheme, scale_max: float) -> IngestResult:
    """Rows of ``evaluator,worker,value,timestamp[,credit]``; credit defaults to 1."""
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        log.warning("no records in input")
        return IngestResult([], scheme, [], 0)
    header = [h.strip().lower() for h in header]
    missing = [h for h in GENERIC_HEADER[:4] if h not in header]
    if missing:
        raise IngestError(f"generic CSV header lacks {missing}")
    idx = {h: header.index(h) for h in GENERIC_HEADER if h in header}
    pending, rejected, n_rows = [], [], 0
    for line_no, row in enumerate(reader, start=2):
        if not row or not any(c.strip() for c in row):
            continue
        n_rows += 1
        try:
            evaluator = row[idx["evaluator"]].strip()
            worker = row[idx["worker"]].strip()
            value = float(row[idx["value"]])
            raw_credit = row[idx["credit"]].strip() if "credit" in idx and idx["credit"] < len(row) else ""
            credit = float(raw_credit) if raw_credit else 1.0
        except (IndexError, ValueError) as exc:
            rejected.append(RejectedRow(line_no, f"malformed row: {exc}"))
            continue
        try:
            ts = parse_timestamp(row[idx["timestamp"]])
        except ValueError as exc:
            rejected.append(RejectedRow(line_no, f"malformed timestamp: {exc}"))
            continue
        if not evaluator or not worker:
            rejected.append(RejectedRow(line_no, "empty actor id"))
        elif not (0.0 <= value <= scale_max) or math.isnan(value):
            rejected.append(RejectedRow(line_no, f"value {value} outside [0, {scale_max}]"))
        elif not credit > 0 or math.isinf(credit):
            rejected.append(RejectedRow(line_no, f"credit {credit} must be positive"))
        else:
            pending.append((line_no, evaluator, worker, ts, value, credit))
    return _finish(pending, scheme, rejected, n_rows)


def format_timestamp(ts: datetime) -> str:
    return ts.isoformat(timespec="microseconds" if ts.microsecond else "seconds")


def write_generic(evals: Iterable[Evaluation], out: TextIO) -> None:
    """Inverse of :func:`parse_generic` for accepted records (floats written with ``repr``)."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(GENERIC_HEADER)
    for e in evals:
        w.writerow([e.evaluator, e.worker, repr(e.value), format_timestamp(e.timestamp), repr(e.credit)])
