"""Readers for the simulation artifacts and the sidecar writer.

Only the documented interchange formats are consumed: CSV tables with their
fixed headers, and GCNF1 binary state dumps (magic "GCNF1", five little-endian
uint32 dims (4, n, n, n_s, reserved), float64 densities in (beta, x, y, s)
row-major order, one float64 time stamp).

Every figure writes a sidecar next to the image holding exactly the values
that were plotted: CSV inputs are echoed verbatim (byte-identical lines),
binary-derived values are printed with full round-trip precision.
"""

from __future__ import annotations

import os

import numpy as np

MAGIC = b"GCNF1"


class InputError(RuntimeError):
    """Missing or malformed input artifact."""


def read_state(path):
    """GCNF1 dump -> (f[4, n, n, ns], t_ms)."""
    if not os.path.exists(path):
        raise InputError(f"missing state dump: {path}")
    with open(path, "rb") as fh:
        if fh.read(5) != MAGIC:
            raise InputError(f"bad magic in {path}")
        dims = np.frombuffer(fh.read(20), dtype="<u4")
        nb, n, n2, ns, _ = (int(d) for d in dims)
        if nb != 4 or n != n2:
            raise InputError(f"unexpected dims {tuple(dims)} in {path}")
        f = np.frombuffer(fh.read(nb * n * n * ns * 8), dtype="<f8")
        if f.size != nb * n * n * ns:
            raise InputError(f"truncated state dump: {path}")
        t = np.frombuffer(fh.read(8), dtype="<f8")
    return f.reshape(nb, n, n, ns).copy(), float(t[0])


def read_csv(path, expected_header):
    """CSV with a known header -> (raw lines, list of row-field lists)."""
    if not os.path.exists(path):
        raise InputError(f"missing input: {path}")
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != expected_header:
        raise InputError(f"{path}: expected header {expected_header!r}, "
                         f"got {lines[0] if lines else '<empty>'!r}")
    rows = [line.split(",") for line in lines[1:] if line]
    return lines, rows


def column(rows, idx, kind=float):
    return np.array([kind(r[idx]) for r in rows])


def atomic_write_text(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def sidecar_path(image_path):
    return f"{image_path}.sidecar.csv"


class Sidecar:
    """Accumulates the plotted data; sections echo inputs verbatim."""

    def __init__(self):
        self.lines: list[str] = []

    def echo_file(self, name, raw_lines):
        self.lines.append(f"# file: {name}")
        self.lines.extend(raw_lines)

    def section(self, name, header, rows):
        self.lines.append(f"# derived: {name}")
        self.lines.append(header)
        for row in rows:
            self.lines.append(",".join(repr(float(v)) if isinstance(v, (float, np.floating))
                                       else str(v) for v in row))

    def write(self, image_path):
        atomic_write_text(sidecar_path(image_path), "\n".join(self.lines) + "\n")
