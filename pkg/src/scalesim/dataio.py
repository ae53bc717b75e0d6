"""Reading, normalising and writing scale databases, populations and run
manifests.

Database CSV (UTF-8, comma-delimited, header required)::

    id,name,culture,region,source_kind,tuning,value_kind,values,flags,excluded_reason

``value_kind`` is CentsIntervals, CentsNotes or FrequencyRatios; ``values``
and ``flags`` are semicolon-separated.  Ratios may be written as decimals
or fractions such as ``9/8``.  Flags: ``infer_tonic``, ``append_octave``.
A nonempty ``excluded_reason`` drops the row.
"""

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import OCTAVE, Population, ScaleRecord
from .errors import InvalidScale, ParseError

DB_COLUMNS = ("id", "name", "culture", "region", "source_kind", "tuning", "value_kind",
              "values", "flags", "excluded_reason")
REQUIRED_COLUMNS = DB_COLUMNS[:-1]
VALUE_KINDS = ("CentsIntervals", "CentsNotes", "FrequencyRatios")
FLAGS = ("infer_tonic", "append_octave")
N_RANGE = (4, 9)
TONIC_TOLERANCE = 50.0
OCTAVE_SLACK = 50.0  # notes up to 1250 cents still count as the octave
DEDUPE_TOLERANCE = 1.0
PRECISION = 3
DATABASE_ENV = "SCALESIM_DATABASE"
DEFAULT_DATABASE = Path("data") / "scales_database.csv"


@dataclass(frozen=True)
class RawScaleRow:
    id: str
    name: str
    culture: str
    region: str
    source_kind: str
    tuning: str
    value_kind: str
    values: Tuple[float, ...]
    flags: frozenset = frozenset()
    excluded_reason: str = ""
    line: int = 0


@dataclass(frozen=True)
class Rejection:
    id: str
    reason: str
    detail: str = ""


@dataclass
class ParseResult:
    rows: List[RawScaleRow]
    errors: List[Tuple[int, str]] = field(default_factory=list)


def _parse_value(tok: str) -> float:
    tok = tok.strip()
    if "/" in tok:
        return float(Fraction(tok))
    v = float(tok)
    if not math.isfinite(v):
        raise ValueError(f"non-finite value {tok!r}")
    return v


def _row(rec: dict, line: int) -> RawScaleRow:
    kind = rec["value_kind"].strip()
    if kind not in VALUE_KINDS:
        raise ValueError(f"value_kind must be one of {VALUE_KINDS}, got {kind!r}")
    toks = [t for t in rec["values"].split(";") if t.strip()]
    if not toks:
        raise ValueError("values is empty")
    values = tuple(_parse_value(t) for t in toks)
    flags = frozenset(t.strip() for t in (rec.get("flags") or "").split(";") if t.strip())
    bad = flags - set(FLAGS)
    if bad:
        raise ValueError(f"unknown flags {sorted(bad)}")
    if not rec["id"].strip():
        raise ValueError("id is empty")
    return RawScaleRow(rec["id"].strip(), rec["name"], rec["culture"], rec["region"],
                       rec["source_kind"].strip(), rec["tuning"], kind, values, flags,
                       (rec.get("excluded_reason") or "").strip(), line)


def parse_database(path, strict: bool = False) -> ParseResult:
    """Parse a database file; malformed rows are reported with their line
    number and skipped, or raise :class:`ParseError` when ``strict``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ParseError(f"{path}: missing columns {missing}")
        out = ParseResult([])
        for rec in reader:
            line = reader.line_num
            try:
                if None in rec or any(rec.get(c) is None for c in REQUIRED_COLUMNS):
                    raise ValueError("wrong number of fields")
                out.rows.append(_row(rec, line))
            except (ValueError, ZeroDivisionError) as exc:
                if strict:
                    raise ParseError(f"{path}:{line}: {exc}") from exc
                out.errors.append((line, str(exc)))
    return out


def _to_notes(row: RawScaleRow) -> np.ndarray:
    v = np.asarray(row.values, dtype=np.float64)
    if row.value_kind == "CentsIntervals":
        return np.concatenate([[0.0], np.cumsum(v)])
    if row.value_kind == "FrequencyRatios":
        if np.any(v <= 0):
            raise InvalidScale("frequency ratios must be positive")
        v = OCTAVE * np.log2(v / v[0])
    return v - v[0]


def infer_tonic(notes: np.ndarray, tol: float = TONIC_TOLERANCE) -> Optional[np.ndarray]:
    """Notes from the earliest tonic whose octave lies within ``tol`` cents.

    The scale runs from note i to the first later note j with
    |notes[j] - notes[i] - 1200| <= tol and is re-based to start at 0.
    """
    for i in range(notes.size):
        span = notes[i + 1:] - notes[i]
        hit = np.flatnonzero(np.abs(span - OCTAVE) <= tol)
        if hit.size:
            j = i + 1 + int(hit[0])
            return notes[i:j + 1] - notes[i]
    return None


def normalize(row: Union[RawScaleRow, ScaleRecord]) -> Union[ScaleRecord, Rejection]:
    """Apply the inclusion rules and return a record or the reason for rejection."""
    if isinstance(row, ScaleRecord):
        row = record_to_row(row)
    if row.excluded_reason:
        return Rejection(row.id, "Excluded", row.excluded_reason)
    if row.source_kind not in ("Theory", "Measured"):
        return Rejection(row.id, "InvalidSourceKind", row.source_kind)
    try:
        notes = _to_notes(row)
    except InvalidScale as exc:
        return Rejection(row.id, "InvalidValues", str(exc))
    if "infer_tonic" in row.flags:
        notes = infer_tonic(np.sort(notes))
        if notes is None:
            return Rejection(row.id, "NoTonic", "no note pair spans an octave within 50 cents")
    notes = notes[notes <= OCTAVE + OCTAVE_SLACK]
    if "append_octave" in row.flags and notes[-1] < OCTAVE:
        notes = np.concatenate([notes, [OCTAVE]])
    steps = np.diff(notes)
    if steps.size < N_RANGE[0]:
        return Rejection(row.id, "TooFewNotes", f"N={steps.size}")
    if steps.size > N_RANGE[1]:
        return Rejection(row.id, "TooManyNotes", f"N={steps.size}")
    if np.any(steps <= 0):
        return Rejection(row.id, "InvalidValues", "notes must be strictly increasing")
    return ScaleRecord(row.id, row.name, row.culture, row.region, row.source_kind,
                       tuple(float(s) for s in steps), row.tuning)


def record_to_row(rec: ScaleRecord) -> RawScaleRow:
    return RawScaleRow(rec.id, rec.name, rec.culture, rec.region, rec.source_kind, rec.tuning,
                       "CentsIntervals", tuple(rec.adjacent_intervals))


def dedupe(records: Sequence[ScaleRecord], tol: float = DEDUPE_TOLERANCE) -> List[ScaleRecord]:
    """Drop records whose notes all match an earlier record of the same
    culture within ``tol`` cents; the first occurrence is kept."""
    kept: List[ScaleRecord] = []
    seen: Dict[Tuple[str, int], List[np.ndarray]] = {}
    for rec in records:
        key = (rec.culture, rec.N)
        notes = rec.notes
        if any(np.all(np.abs(notes - other) <= tol) for other in seen.get(key, [])):
            continue
        seen.setdefault(key, []).append(notes)
        kept.append(rec)
    return kept


@dataclass
class Database:
    records: List[ScaleRecord]
    rejections: List[Rejection]
    errors: List[Tuple[int, str]]
    duplicates: int = 0


def load_database(path, strict: bool = False) -> Database:
    """Parse, normalise and de-duplicate a database file."""
    parsed = parse_database(path, strict)
    recs, rej = [], []
    for row in parsed.rows:
        out = normalize(row)
        (recs if isinstance(out, ScaleRecord) else rej).append(out)
    unique = dedupe(recs)
    return Database(unique, rej, parsed.errors, len(recs) - len(unique))


def database_path(explicit=None) -> Optional[Path]:
    """First existing path among ``explicit``, $SCALESIM_DATABASE and the default."""
    for cand in (explicit, os.environ.get(DATABASE_ENV), DEFAULT_DATABASE):
        if cand and Path(cand).is_file():
            return Path(cand)
    return None


def _fmt(v: float) -> str:
    return f"{v:.{PRECISION}f}"


def write_database(records: Iterable[ScaleRecord], path) -> None:
    """Write records as CentsIntervals rows at 1e-3 cent precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(DB_COLUMNS)
        for r in records:
            wr.writerow([r.id, r.name, r.culture, r.region, r.source_kind, r.tuning,
                         "CentsIntervals", ";".join(_fmt(v) for v in r.adjacent_intervals), "", ""])


def write_population(pop: Population, path) -> None:
    """One row per scale: N, semicolon-separated intervals, cost columns."""
    names = list(pop.costs)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["N", "intervals"] + names)
        cols = [pop.costs[c] for c in names]
        for i, row in enumerate(pop.intervals):
            wr.writerow([pop.N, ";".join(_fmt(v) for v in row)] + [repr(float(c[i])) for c in cols])


def read_population(path) -> Population:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["N", "intervals"]:
            raise ParseError(f"{path}: not a population file")
        names = header[2:]
        rows, cols = [], {c: [] for c in names}
        for line in reader:
            rows.append([float(v) for v in line[1].split(";")])
            for c, v in zip(names, line[2:]):
                cols[c].append(float(v))
    if not rows:
        raise ParseError(f"{path}: no scales")
    return Population(np.array(rows), cols)


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, command: str, config: dict, seed, version: str,
                   inputs: Sequence = (), outputs: Sequence = ()) -> dict:
    """Record what is needed to repeat a run; written before any output."""
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": version,
        "inputs": {str(p): file_sha256(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
    }
    write_json(manifest, path)
    return manifest
