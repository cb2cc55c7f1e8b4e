"""Readers and writers for tag files, histograms, field maps and fit results.

Tag files come in two flavours, chosen by extension:

* ``.csv``: header ``channel,time_ps`` then one record per line.
* anything else: binary, ``b"PTAG"`` + little-endian u16 version, followed by
  12-byte records ``{time_ps: i64, channel: u16, padding: u16 = 0}``.

Neither format stores the acquisition length; readers take it as an argument
and otherwise fall back to one ps past the last tag.
"""
from __future__ import annotations

import io
import math
import struct
import warnings
from pathlib import Path

import numpy as np

from .correlator import Histogram
from .coupling import FieldMap
from .fitter import FitResult, format_fit_result, parse_fit_result
from .tags import TagStream

MAGIC = b"PTAG"
VERSION = 1
RECORD = np.dtype([("time", "<i8"), ("channel", "<u2"), ("pad", "<u2")])
TAG_CSV_HEADER = "channel,time_ps"
HIST_CSV_HEADER = "bin_start_ps,bin_end_ps,counts,normalized"


class FormatError(ValueError):
    """An input file does not follow its declared format."""


def _duration(times, duration):
    if duration is not None:
        return int(duration)
    return int(times[-1]) + 1 if times.size else 0


# -- tag streams --------------------------------------------------------------

def write_tags(path, stream: TagStream):
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, "w", newline="") as fh:
            fh.write(TAG_CSV_HEADER + "\n")
            buf = io.StringIO()
            np.savetxt(buf, np.column_stack([stream.channels.astype(np.int64), stream.times]),
                       fmt="%d", delimiter=",")
            fh.write(buf.getvalue())
        return
    rec = np.zeros(len(stream), RECORD)
    rec["time"] = stream.times
    rec["channel"] = stream.channels
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<H", VERSION))
        fh.write(rec.tobytes())


def read_tags(path, duration=None) -> TagStream:
    """Read a tag file; ``duration`` in ps."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path) as fh:
            header = fh.readline().strip()
            if header != TAG_CSV_HEADER:
                raise FormatError(f"{path}: expected header {TAG_CSV_HEADER!r}, got {header!r}")
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", UserWarning)  # header-only file
                    data = np.loadtxt(fh, delimiter=",", dtype=np.int64, ndmin=2)
            except ValueError as exc:
                raise FormatError(f"{path}: {exc}") from exc
        if data.size == 0:
            data = np.empty((0, 2), np.int64)
        if data.shape[1] != 2:
            raise FormatError(f"{path}: expected two columns")
        if np.any(data[:, 0] < 0) or np.any(data[:, 0] > 0xFFFF):
            raise FormatError(f"{path}: channel out of range")
        times, channels = data[:, 1], data[:, 0].astype(np.uint16)
    else:
        raw = path.read_bytes()
        if len(raw) < 6 or raw[:4] != MAGIC:
            raise FormatError(f"{path}: missing PTAG magic")
        (version,) = struct.unpack("<H", raw[4:6])
        if version != VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        body = raw[6:]
        if len(body) % RECORD.itemsize:
            raise FormatError(f"{path}: truncated record")
        rec = np.frombuffer(body, RECORD)
        if np.any(rec["pad"] != 0):
            raise FormatError(f"{path}: nonzero padding")
        times, channels = rec["time"].astype(np.int64), rec["channel"].astype(np.uint16)
    if times.size > 1 and np.any(np.diff(times) < 0):
        raise FormatError(f"{path}: tag times are not sorted")
    return TagStream(times, channels, _duration(times, duration))


# -- histograms ---------------------------------------------------------------

def write_histogram(path, h: Histogram):
    """CSV with the declared header; the normalization goes in a ``#`` line above it."""
    edges = h.edges
    norm = h.normalized if h.norm is not None else np.zeros(h.n_bins)
    with open(path, "w", newline="") as fh:
        if h.norm is not None:
            fh.write(f"# norm={float(h.norm)!r}\n")
        fh.write(HIST_CSV_HEADER + "\n")
        for lo, hi, c, g in zip(edges[:-1], edges[1:], h.counts, norm):
            fh.write(f"{lo},{hi},{int(c)},{float(g)!r}\n")


def read_histogram(path) -> Histogram:
    norm = None
    rows = []
    header_seen = False
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line[1:].strip().startswith("norm="):
                    norm = float(line.split("=", 1)[1])
                continue
            if not header_seen:
                if line != HIST_CSV_HEADER:
                    raise FormatError(f"{path}: expected header {HIST_CSV_HEADER!r}")
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 fields")
            try:
                rows.append((int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise FormatError(f"{path}: no histogram rows")
    arr = np.array([r[:3] for r in rows], dtype=np.int64)
    width = int(arr[0, 1] - arr[0, 0])
    if width <= 0 or np.any(arr[:, 1] - arr[:, 0] != width) or np.any(arr[1:, 0] != arr[:-1, 1]):
        raise FormatError(f"{path}: bins are not contiguous and uniform")
    tau_max = int(-arr[0, 0])
    if arr[-1, 1] != tau_max:
        raise FormatError(f"{path}: bins are not symmetric about zero")
    if norm is None:
        # recover the normalization from the ratio column when the comment is absent
        g = np.array([r[3] for r in rows])
        ok = (arr[:, 2] > 0) & (g > 0)
        if np.any(ok):
            norm = float(np.median(arr[ok, 2] / g[ok]))
    try:
        return Histogram(width, tau_max, arr[:, 2], int(arr[:, 2].sum()), norm)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# -- field maps ---------------------------------------------------------------

def write_field(path, field: FieldMap):
    with open(path, "w") as fh:
        fh.write(f"{field.nx} {field.ny} {float(field.dx)!r} {float(field.dy)!r}\n")
        for v in field.amplitude.ravel():
            fh.write(f"{float(v.real)!r} {float(v.imag)!r}\n")


def read_field(path) -> FieldMap:
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 4:
            raise FormatError(f"{path}: first line must be 'nx ny dx_um dy_um'")
        try:
            nx, ny = int(head[0]), int(head[1])
            dx, dy = float(head[2]), float(head[3])
            data = np.loadtxt(fh, dtype=float, ndmin=2)
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from exc
    if data.shape != (nx * ny, 2):
        raise FormatError(f"{path}: expected {nx * ny} lines of 're im'")
    try:
        return FieldMap(dx, dy, (data[:, 0] + 1j * data[:, 1]).reshape(ny, nx))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# -- fit results and two-column tables ----------------------------------------

def write_fit_result(path, result: FitResult, model_name=""):
    Path(path).write_text(format_fit_result(result, model_name))


def read_fit_result(path):
    try:
        return parse_fit_result(Path(path).read_text())
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def read_xy(path, columns=2):
    """Numeric CSV with one header line; returns an ``(n, columns)`` array."""
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if data.shape[1] < columns:
        raise FormatError(f"{path}: expected at least {columns} columns")
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: non-finite values")
    return data


def write_xy(path, header, *columns):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in zip(*columns):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def write_svg_plot(path, series, width=640, height=400, title=""):
    """Minimal SVG line plot; ``series`` is a list of ``(label, x, y)``."""
    pad = 40
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = min(0.0, float(ys.min())), float(ys.max())
    if math.isclose(x0, x1):
        x1 = x0 + 1
    if math.isclose(y0, y1):
        y1 = y0 + 1
    colors = ("#000000", "#d62728", "#1f77b4", "#2ca02c")

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
           'fill="none" stroke="#888"/>',
           f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
           f'<text x="{pad}" y="{height - 10}" font-size="11">{x0:.4g}</text>',
           f'<text x="{width - pad}" y="{height - 10}" font-size="11" '
           f'text-anchor="end">{x1:.4g}</text>',
           f'<text x="5" y="{pad}" font-size="11">{y1:.4g}</text>']
    for i, (label, x, y) in enumerate(series):
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        c = colors[i % len(colors)]
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1" points="{pts}"/>')
        out.append(f'<text x="{width - pad - 5}" y="{pad + 15 + 14 * i}" font-size="11" '
                   f'text-anchor="end" fill="{c}">{label}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
