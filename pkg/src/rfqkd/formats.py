"""Flat-file formats read and written by the command line tools.

Correlator CSV, one row per quantity (marginal rows are optional)::

    quantity,x,y,value
    E,1,1,-0.95
    mA,1,,0.0
    mB,,2,0.0

Count CSV, one row per setting pair::

    x,y,n_pp,n_pm,n_mp,n_mm

State JSON holds ``rho`` as nested ``[re, im]`` pairs in row-major order and,
optionally, ``triad_a`` / ``triad_b`` as three Bloch vectors each.
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from .correlations import SETTING_PAIRS, CorrelatorTable, CountTable, estimate_correlators
from .driftlab import BlockRecord
from .qmath import MeasurementTriad, TwoQubitState

TABLE_HEADER = ["quantity", "x", "y", "value"]
COUNT_HEADER = ["x", "y", "n_pp", "n_pm", "n_mp", "n_mm"]
BLOCK_HEADER = (["block_index", "t_start", "t_end", "x", "y", "n_pp", "n_pm", "n_mp", "n_mm",
                 "exact"] + [f"r{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)])
WINDOW_HEADER = ["window_index", "t_start", "t_end", "s_max", "c_max",
                 "r_di1", "r_di2", "r_dd6", "r_bb84", "r_dd"]
HISTOGRAM_HEADER = ["rate", "visibility", "bin_center", "count"]


class ParseError(ValueError):
    """Malformed input; the message names the offending line when known."""


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".9g")
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


# --------------------------------------------------------------------------
# matrices

def complex_matrix_to_json(m) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def complex_matrix_from_json(data) -> np.ndarray:
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"matrix is not a nested list of [re, im] pairs: {exc}") from None
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ParseError(f"expected an n x n x 2 array of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def state_to_json(state: TwoQubitState) -> dict:
    return {"rho": complex_matrix_to_json(state.rho)}


def read_state_json(text: str):
    """Parse a state document; returns ``(state, triad_a, triad_b)``."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict) or "rho" not in data:
        raise ParseError("state JSON needs a 'rho' entry")
    state = TwoQubitState(complex_matrix_from_json(data["rho"]))
    triads = []
    for key in ("triad_a", "triad_b"):
        if key in data:
            try:
                vectors = np.array(data[key], dtype=float)
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{key}: {exc}") from None
            if vectors.shape != (3, 3):
                raise ParseError(f"{key} must hold three 3-vectors")
            triads.append(MeasurementTriad(vectors))
        else:
            triads.append(MeasurementTriad.canonical())
    return state, triads[0], triads[1]


# --------------------------------------------------------------------------
# correlator and count tables

def _float(text, lineno, what):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"line {lineno}: {what} {text!r} is not a number") from None
    if not math.isfinite(v):
        raise ParseError(f"line {lineno}: {what} must be finite")
    return v


def _setting(text, lineno, what):
    if text not in ("1", "2", "3"):
        raise ParseError(f"line {lineno}: {what} must be 1, 2 or 3, got {text!r}")
    return int(text)


def _rows(text):
    reader = csv.reader(io.StringIO(text))
    rows = [(i + 1, [c.strip() for c in row]) for i, row in enumerate(reader)]
    return [(n, r) for n, r in rows if r and any(r)]


def read_table_csv(text: str):
    """Parse correlator or count CSV.

    Returns ``(table, has_marginals)``.  Count files always carry marginals.
    """
    rows = _rows(text)
    if not rows:
        raise ParseError("empty input")
    _, header = rows[0]
    header = [h.lower() for h in header]
    if header == TABLE_HEADER:
        return _read_correlator_rows(rows[1:])
    if header == COUNT_HEADER:
        return _read_count_rows(rows[1:]), True
    raise ParseError(f"line 1: unrecognised header {','.join(header)!r}; expected "
                     f"{','.join(TABLE_HEADER)!r} or {','.join(COUNT_HEADER)!r}")


def _read_correlator_rows(rows):
    e = {}
    ma = {}
    mb = {}
    for lineno, row in rows:
        if len(row) != 4:
            raise ParseError(f"line {lineno}: expected 4 fields, got {len(row)}")
        kind, xs, ys, vs = row
        v = _float(vs, lineno, "value")
        if abs(v) > 1.0:
            raise ParseError(f"line {lineno}: |{kind}| = {abs(v)} exceeds 1")
        if kind == "E":
            key = (_setting(xs, lineno, "x"), _setting(ys, lineno, "y"))
            target = e
        elif kind == "mA":
            key = _setting(xs, lineno, "x")
            target = ma
        elif kind == "mB":
            key = _setting(ys, lineno, "y")
            target = mb
        else:
            raise ParseError(f"line {lineno}: unknown quantity {kind!r}")
        if key in target:
            raise ParseError(f"line {lineno}: duplicate entry for {kind} {key}")
        target[key] = v
    missing = [p for p in SETTING_PAIRS if p not in e]
    if missing:
        raise ParseError(f"missing correlators for setting pairs {missing}")
    has_marginals = len(ma) == 3 and len(mb) == 3
    if (ma or mb) and not has_marginals:
        raise ParseError("marginals must be given for all three settings of both parties")
    E = np.array([[e[(x, y)] for y in (1, 2, 3)] for x in (1, 2, 3)])
    if has_marginals:
        table = CorrelatorTable(E, [ma[i] for i in (1, 2, 3)], [mb[i] for i in (1, 2, 3)])
    else:
        table = CorrelatorTable(E)
    return table, has_marginals


def _read_count_rows(rows):
    counts = {}
    for lineno, row in rows:
        if len(row) != 6:
            raise ParseError(f"line {lineno}: expected 6 fields, got {len(row)}")
        pair = (_setting(row[0], lineno, "x"), _setting(row[1], lineno, "y"))
        try:
            n = [int(c) for c in row[2:]]
        except ValueError:
            raise ParseError(f"line {lineno}: counts must be integers") from None
        if min(n) < 0:
            raise ParseError(f"line {lineno}: negative count")
        if sum(n) == 0:
            raise ParseError(f"line {lineno}: setting pair {pair} has no counts")
        if pair in counts:
            raise ParseError(f"line {lineno}: duplicate setting pair {pair}")
        counts[pair] = n
    missing = [p for p in SETTING_PAIRS if p not in counts]
    if missing:
        raise ParseError(f"missing counts for setting pairs {missing}")
    return estimate_correlators(CountTable(counts))


def table_rows(table: CorrelatorTable):
    rows = [("E", x, y, table.E[x - 1, y - 1]) for x, y in SETTING_PAIRS]
    rows += [("mA", x, "", table.m_a[x - 1]) for x in (1, 2, 3)]
    rows += [("mB", "", y, table.m_b[y - 1]) for y in (1, 2, 3)]
    return rows


# --------------------------------------------------------------------------
# blocks and windows

def block_rows(blocks):
    for b in blocks:
        yield ([b.block_index, b.t_start, b.t_end, b.x, b.y, *b.counts, b.exact]
               + [float(v) for v in np.asarray(b.channel_rotation).ravel()])


def read_blocks_csv(text: str) -> list[BlockRecord]:
    rows = _rows(text)
    if not rows or [h.lower() for h in rows[0][1]] != BLOCK_HEADER:
        raise ParseError(f"line 1: expected header {','.join(BLOCK_HEADER)!r}")
    blocks = []
    for lineno, row in rows[1:]:
        if len(row) != len(BLOCK_HEADER):
            raise ParseError(f"line {lineno}: expected {len(BLOCK_HEADER)} fields, got {len(row)}")
        try:
            index = int(row[0])
        except ValueError:
            raise ParseError(f"line {lineno}: block_index must be an integer") from None
        x = _setting(row[3], lineno, "x")
        y = _setting(row[4], lineno, "y")
        exact = row[9] == "1"
        if exact:
            counts = tuple(_float(c, lineno, "probability") for c in row[5:9])
            if min(counts) < 0 or abs(sum(counts) - 1.0) > 1e-6:
                raise ParseError(f"line {lineno}: exact-mode probabilities must sum to 1")
        else:
            try:
                counts = tuple(int(c) for c in row[5:9])
            except ValueError:
                raise ParseError(f"line {lineno}: counts must be integers") from None
            if min(counts) < 0 or sum(counts) == 0:
                raise ParseError(f"line {lineno}: counts must be nonnegative and not all zero")
        rot = np.array([_float(c, lineno, "rotation entry") for c in row[10:]]).reshape(3, 3)
        blocks.append(BlockRecord(index, x, y, counts, rot, exact))
    return blocks


def window_rows(records):
    for r in records:
        rates = r.report.rates()
        yield [r.window_index, r.time_start, r.time_end, r.s_max, r.c_max,
               rates["di1"], rates["di2"], rates["dd6"], rates["bb84"], rates["dd"]]


def read_windows_csv(text: str) -> list[dict]:
    rows = _rows(text)
    if not rows or rows[0][1] != WINDOW_HEADER:
        raise ParseError(f"line 1: expected header {','.join(WINDOW_HEADER)!r}")
    out = []
    for lineno, row in rows[1:]:
        if len(row) != len(WINDOW_HEADER):
            raise ParseError(f"line {lineno}: expected {len(WINDOW_HEADER)} fields")
        rec = {"window_index": int(row[0])}
        for key, val in zip(WINDOW_HEADER[1:], row[1:]):
            rec[key] = _float(val, lineno, key)
        out.append(rec)
    return out


def window_to_json(r) -> dict:
    return {"window_index": r.window_index, "t_start": r.time_start, "t_end": r.time_end,
            "s_max": r.s_max, "c_max": r.c_max, "report": r.report.to_dict(),
            "correlators": r.table.E.tolist(), "tomo_state": state_to_json(r.tomo_state)}
