"""Reading and writing tensors, chains, estimate tables and scenario bundles."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import platform
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .dmh import ARRAY_FIELDS, ChainOutput
from .errors import IntegrityError, InvalidInputError, ParseError, VersionError
from .model import ParamIndex, ResponseTensor, items_from_q

CHAIN_MAGIC = "FIERGM-CHAIN"
CHAIN_FORMAT_VERSION = 1
LONG_HEADER = ("time", "respondent", "item", "value")


# ---------------------------------------------------------------------------
# response tensors


def _label_key(s: str):
    try:
        return (0, float(s), s)
    except ValueError:
        return (1, 0.0, s)


def _time_labels(labels):
    try:
        return np.array([float(s) for s in labels])
    except ValueError:
        return None


def _parse_binary(raw, path, line):
    s = raw.strip()
    if s not in ("0", "1"):
        raise ParseError(f"value {raw!r} is not binary (expected 0 or 1)", line=line, path=path)
    return int(s)


def _sniff_format(path) -> str:
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if header is None:
        raise ParseError("file is empty", line=1, path=path)
    cols = tuple(h.strip().lower() for h in header)
    return "long" if cols == LONG_HEADER else "dense"


def load_tensor(path, format: str = "auto", dims: Optional[tuple] = None) -> ResponseTensor:
    """Read a response tensor.

    ``format="long"``: header ``time,respondent,item,value`` and one row per
    observed cell; cells that never appear are 0. ``format="dense"``: header
    ``time,<item labels...>`` and one row per respondent, rows of the same
    time point given in respondent order, every time point with the same row
    count. ``"auto"`` picks by header.

    With ``dims = (T, n, p)`` the labels must be the integers ``1..T``,
    ``1..n``, ``1..p`` and the tensor has exactly that shape. Otherwise time
    labels are sorted (numerically when possible) and respondent and item
    labels keep first-appearance order.
    """
    path = str(path)
    if not os.path.exists(path):
        raise InvalidInputError(f"no such file: {path}")
    if format == "auto":
        format = _sniff_format(path)
    if format == "long":
        return _load_long(path, dims)
    if format == "dense":
        return _load_dense(path, dims)
    raise InvalidInputError(f"unknown tensor format {format!r}; use 'long' or 'dense'")


def _declared_index(value, size, what, path, line):
    try:
        k = int(value)
    except ValueError:
        raise ParseError(f"{what} label {value!r} is not an integer index", line=line, path=path) from None
    if not 1 <= k <= size:
        raise ParseError(f"{what} index {k} outside 1..{size}", line=line, path=path)
    return k - 1


def _load_long(path, dims):
    cells = {}
    times, resp, items = {}, {}, {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header) != LONG_HEADER:
            raise ParseError(f"expected header {','.join(LONG_HEADER)}", line=1, path=path)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 fields, got {len(row)}", line=line, path=path)
            t, l, j = (c.strip() for c in row[:3])
            v = _parse_binary(row[3], path, line)
            if dims is not None:
                key = (_declared_index(t, dims[0], "time", path, line),
                       _declared_index(l, dims[1], "respondent", path, line),
                       _declared_index(j, dims[2], "item", path, line))
            else:
                times.setdefault(t, None)
                resp.setdefault(l, len(resp))
                items.setdefault(j, len(items))
                key = (t, l, j)
            if key in cells:
                raise ParseError(f"duplicate cell (time={t}, respondent={l}, item={j})",
                                 line=line, path=path)
            cells[key] = v
    if dims is not None:
        T, n, p = (int(d) for d in dims)
        data = np.zeros((T, n, p), dtype=np.int8)
        for (t, l, j), v in cells.items():
            data[t, l, j] = v
        return ResponseTensor(data)
    if not cells:
        raise ParseError("no data rows", line=2, path=path)
    tlabels = sorted(times, key=_label_key)
    tpos = {s: i for i, s in enumerate(tlabels)}
    data = np.zeros((len(tlabels), len(resp), len(items)), dtype=np.int8)
    for (t, l, j), v in cells.items():
        data[tpos[t], resp[l], items[j]] = v
    return ResponseTensor(data, time_labels=_time_labels(tlabels),
                          respondent_labels=list(resp), item_labels=list(items))


def _load_dense(path, dims):
    blocks = {}
    order = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 3 or header[0].strip().lower() != "time":
            raise ParseError("expected header time,<item>,<item>,...", line=1, path=path)
        items = [h.strip() for h in header[1:]]
        if len(set(items)) != len(items):
            raise ParseError("duplicate item labels in header", line=1, path=path)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"ragged row: expected {len(header)} fields, got {len(row)}",
                                 line=line, path=path)
            t = row[0].strip()
            if t not in blocks:
                blocks[t] = []
                order.append(t)
            blocks[t].append([_parse_binary(c, path, line) for c in row[1:]])
    if not blocks:
        raise ParseError("no data rows", line=2, path=path)
    counts = {t: len(b) for t, b in blocks.items()}
    if len(set(counts.values())) != 1:
        raise ParseError(f"ragged dimensions: respondent counts per time differ {counts}", path=path)
    tlabels = sorted(order, key=_label_key)
    data = np.array([blocks[t] for t in tlabels], dtype=np.int8)
    if dims is not None and tuple(data.shape) != tuple(int(d) for d in dims):
        raise ParseError(f"declared dims {tuple(dims)} do not match file shape {data.shape}", path=path)
    n = data.shape[1]
    return ResponseTensor(data, time_labels=_time_labels(tlabels),
                          respondent_labels=[str(l + 1) for l in range(n)], item_labels=items)


def _labels(x: ResponseTensor):
    T, n, p = x.shape
    if x.time_labels is not None:
        tl = [_fmt_num(v) for v in x.time_labels]
    else:
        tl = [str(t + 1) for t in range(T)]
    rl = list(x.respondent_labels) if x.respondent_labels is not None else [str(l + 1) for l in range(n)]
    il = list(x.item_labels) if x.item_labels is not None else [str(j + 1) for j in range(p)]
    return tl, rl, il


def _fmt_num(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def save_tensor(path, x: ResponseTensor, format: str = "long") -> None:
    """Write ``x`` in the long (every cell, zeros included) or dense layout."""
    tl, rl, il = _labels(x)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if format == "long":
            w.writerow(LONG_HEADER)
            for t in range(x.T):
                for l in range(x.n):
                    for j in range(x.p):
                        w.writerow((tl[t], rl[l], il[j], int(x.data[t, l, j])))
        elif format == "dense":
            w.writerow(["time", *il])
            for t in range(x.T):
                for l in range(x.n):
                    w.writerow([tl[t], *x.data[t, l].tolist()])
        else:
            raise InvalidInputError(f"unknown tensor format {format!r}")


# ---------------------------------------------------------------------------
# chains


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def save_chain(path, out: ChainOutput) -> None:
    """Write a one-line JSON header followed by the little-endian float64 payload.

    The header records the format version, the shape of every array, the
    metadata and the SHA-256 of the payload.
    """
    arrays = [np.ascontiguousarray(getattr(out, name), dtype="<f8") for name in ARRAY_FIELDS]
    payload = b"".join(a.tobytes() for a in arrays)
    header = {
        "magic": CHAIN_MAGIC,
        "format_version": CHAIN_FORMAT_VERSION,
        "package_version": __version__,
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in zip(ARRAY_FIELDS, arrays)],
        "payload_bytes": len(payload),
        "sha256": hashlib.sha256(payload).hexdigest(),
        "metadata": _jsonable(out.metadata),
    }
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(payload)
    os.replace(tmp, path)


def load_chain(path) -> ChainOutput:
    """Inverse of :func:`save_chain`; raises before returning anything on damage."""
    with open(path, "rb") as fh:
        first = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(first.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IntegrityError(f"{path}: unreadable chain header ({exc})") from None
    if not isinstance(header, dict) or header.get("magic") != CHAIN_MAGIC:
        raise IntegrityError(f"{path}: not a chain file")
    if header.get("format_version") != CHAIN_FORMAT_VERSION:
        raise VersionError(
            f"{path}: chain format version {header.get('format_version')} is not supported "
            f"(this build reads version {CHAIN_FORMAT_VERSION})"
        )
    if len(payload) != header["payload_bytes"]:
        raise IntegrityError(
            f"{path}: payload has {len(payload)} bytes, header declares {header['payload_bytes']} (truncated?)"
        )
    if hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise IntegrityError(f"{path}: payload checksum mismatch")
    fields = {}
    offset = 0
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).reshape(shape)
        fields[spec["name"]] = arr.astype(np.float64)
        offset += 8 * count
    if set(fields) != set(ARRAY_FIELDS):
        raise IntegrityError(f"{path}: array set {sorted(fields)} does not match {sorted(ARRAY_FIELDS)}")
    return ChainOutput(metadata=header["metadata"], **fields)


def save_estimates(path, theta_hat, times=None) -> None:
    """Write a ``T x q`` table with one labeled column per functional parameter."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    T, q = theta_hat.shape
    names = ParamIndex(items_from_q(q)).names
    times = list(range(1, T + 1)) if times is None else list(times)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", *names])
        for t in range(T):
            w.writerow([_fmt_num(times[t]), *(repr(float(v)) for v in theta_hat[t])])


def load_estimates(path):
    """Return ``(theta_hat, names, times)`` from a table written by :func:`save_estimates`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "time":
            raise ParseError("expected header time,<parameter names>", line=1, path=str(path))
        rows, times = [], []
        for row in reader:
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields", line=reader.line_num, path=str(path))
            times.append(float(row[0]))
            rows.append([float(v) for v in row[1:]])
    return np.array(rows), header[1:], np.array(times)


# ---------------------------------------------------------------------------
# scenario bundles and manifests


def save_bundle(directory, x: ResponseTensor, truth, spec) -> None:
    """Write ``tensor.csv``, ``truth.csv``, ``zero_set.json`` and ``manifest.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_tensor(d / "tensor.csv", x)
    theta = np.asarray(truth.theta.theta)
    names = truth.theta.index.names
    with open(d / "truth.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "i", "label", "value"])
        for t in range(theta.shape[0]):
            for i in range(theta.shape[1]):
                w.writerow([t + 1, i + 1, names[i], repr(float(theta[t, i]))])
    sets = {
        "true_zero": [int(i) for i in truth.true_zero],
        "true_nonzero": [int(i) for i in truth.true_nonzero],
        "groups": [int(g) for g in truth.groups],
    }
    (d / "zero_set.json").write_text(json.dumps(sets, indent=1) + "\n")
    write_manifest(d / "manifest.json", "simulate", {"scenario": spec.to_dict()}, seed=spec.seed)


def load_bundle(directory):
    """Return ``(tensor, theta_true, true_zero, true_nonzero)`` from a bundle."""
    d = Path(directory)
    x = load_tensor(d / "tensor.csv")
    rows = []
    with open(d / "truth.csv", newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            try:
                rows.append((int(rec["t"]), int(rec["i"]), float(rec["value"])))
            except (KeyError, TypeError, ValueError):
                raise ParseError("bad truth row", line=reader.line_num, path=str(d / "truth.csv")) from None
    T = max(r[0] for r in rows)
    q = max(r[1] for r in rows)
    theta = np.full((T, q), np.nan)
    for t, i, v in rows:
        theta[t - 1, i - 1] = v
    if np.isnan(theta).any():
        raise ParseError("truth table is incomplete", path=str(d / "truth.csv"))
    sets = json.loads((d / "zero_set.json").read_text())
    return x, theta, np.array(sets["true_zero"], dtype=int), np.array(sets["true_nonzero"], dtype=int)


def write_manifest(path, command: str, config: dict, seed=None, extra: Optional[dict] = None) -> dict:
    """Record the resolved configuration, seed and code version of a run."""
    manifest = {
        "command": command,
        "package_version": __version__,
        "seed": seed,
        "config": _jsonable(config),
        "argv": sys.argv,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    if extra:
        manifest.update(_jsonable(extra))
    Path(path).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest
