"""Line-oriented text formats for measures, transport plans and Markov models,
plus the JSON/CSV artifacts of an experiment run.

Floats are written with 17 significant digits, which round-trips doubles.
Blank lines and lines starting with `#` are skipped; line numbers in
parse errors count every physical line.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from collections.abc import Iterator
from pathlib import Path

import numpy as np

from app.core.errors import InputError, LabError, ParseError
from app.services.markov import MarkovModel
from app.services.measures import WEIGHT_SUM_TOL, DiscreteMeasure, consolidate
from app.services.transport import TransportPlan

_HEADER = re.compile(r"^(\w+=\S+)(\s+\w+=\S+)*$")


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def _content_lines(text: str) -> Iterator[tuple[int, str]]:
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield number, line


def _header(line: str, number: int, keys: tuple[str, ...]) -> dict[str, int]:
    if not _HEADER.match(line):
        raise ParseError(f"expected header '{' '.join(k + '=<n>' for k in keys)}'", number)
    fields = dict(part.split("=", 1) for part in line.split())
    out = {}
    for key in keys:
        try:
            out[key] = int(fields[key])
        except KeyError:
            raise ParseError(f"header is missing '{key}='", number) from None
        except ValueError:
            raise ParseError(f"'{key}' must be an integer", number) from None
        if out[key] < 1:
            raise ParseError(f"'{key}' must be positive", number)
    return out


def _floats(line: str, number: int, count: int) -> list[float]:
    parts = line.split()
    if len(parts) != count:
        raise ParseError(f"expected {count} numbers, found {len(parts)}", number)
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise ParseError(f"not a number: {exc}", number) from None
    if not all(math.isfinite(v) for v in values):
        raise ParseError("values must be finite", number)
    return values


def _take(lines: Iterator[tuple[int, str]], last: int, what: str) -> tuple[int, str]:
    try:
        return next(lines)
    except StopIteration:
        raise ParseError(f"unexpected end of input, expected {what}", last + 1) from None


def dumps_measure(m: DiscreteMeasure) -> str:
    rows = [f"dim={m.dim} atoms={m.size}"]
    for w, x in zip(m.weights, m.points):
        rows.append(" ".join([fmt(w), *(fmt(c) for c in x)]))
    return "\n".join(rows) + "\n"


def loads_measure(text: str) -> DiscreteMeasure:
    """Parse `dim=<d> atoms=<k>` followed by k lines `w x1 ... xd`."""
    lines = _content_lines(text)
    number, line = _take(lines, 0, "a measure header")
    head = _header(line, number, ("dim", "atoms"))
    dim, atoms = head["dim"], head["atoms"]
    weights, points = [], []
    for _ in range(atoms):
        number, line = _take(lines, number, f"{atoms} atom lines")
        values = _floats(line, number, dim + 1)
        if values[0] < 0:
            raise ParseError("atom weight must be nonnegative", number)
        weights.append(values[0])
        points.append(values[1:])
    total = math.fsum(weights)
    if abs(total - 1.0) >= WEIGHT_SUM_TOL:
        raise ParseError(f"weights sum to {fmt(total)}, not 1", number)
    extra = next(lines, None)
    if extra is not None and not extra[1].startswith("plan"):
        raise ParseError("trailing content after the last atom", extra[0])
    return consolidate(np.array(points).reshape(atoms, dim), weights)


def dumps_plan(plan: TransportPlan) -> str:
    entries = plan.entries()
    rows = [f"plan rows={plan.rows} cols={plan.cols} entries={len(entries)}"]
    rows.extend(f"{i} {j} {fmt(mass)}" for i, j, mass in entries)
    return "\n".join(rows) + "\n"


def dumps_model(model: MarkovModel) -> str:
    rows = [f"states={model.size} dim={model.dim}"]
    rows.extend(" ".join(fmt(c) for c in x) for x in model.states)
    rows.extend(" ".join(fmt(p) for p in row) for row in model.kernel)
    return "\n".join(rows) + "\n"


def loads_model(text: str) -> MarkovModel:
    """Parse `states=<k> dim=<d>`, k state lines, then k rows of P; invariants re-verified."""
    lines = _content_lines(text)
    number, line = _take(lines, 0, "a model header")
    head = _header(line, number, ("states", "dim"))
    k, dim = head["states"], head["dim"]
    states = []
    for _ in range(k):
        number, line = _take(lines, number, f"{k} state lines")
        states.append(_floats(line, number, dim))
    kernel = []
    for _ in range(k):
        number, line = _take(lines, number, f"{k} transition rows")
        row = _floats(line, number, k)
        if any(p < 0 or p > 1 for p in row):
            raise ParseError("transition probabilities must lie in [0, 1]", number)
        kernel.append(row)
    extra = next(lines, None)
    if extra is not None:
        raise ParseError("trailing content after the transition matrix", extra[0])
    return MarkovModel.from_kernel(np.array(states), np.array(kernel))


def _read(path: str | Path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def read_measure(path: str | Path) -> DiscreteMeasure:
    try:
        return loads_measure(_read(path))
    except ParseError as exc:
        raise ParseError(f"{path}: {exc.message}") from None


def read_model(path: str | Path) -> MarkovModel:
    try:
        return loads_model(_read(path))
    except ParseError as exc:
        raise ParseError(f"{path}: {exc.message}") from None


def write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise LabError(f"cannot write {path}: {exc.strerror}") from None


def dumps_samples(samples: np.ndarray) -> str:
    return "".join(fmt(z) + "\n" for z in samples)


def loads_samples(text: str) -> np.ndarray:
    return np.array([float(line) for _, line in _content_lines(text)])


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def canonical_json(document: dict) -> bytes:
    """Sorted keys, no insignificant whitespace: the bytes the digest is taken over."""
    return json.dumps(document, sort_keys=True, separators=(",", ":")).encode()


def config_digest(document: dict) -> str:
    return hashlib.sha256(canonical_json(document)).hexdigest()
