"""State dumps and CSV artifacts.

Binary field dumps (GCNF1): magic "GCNF1", five little-endian uint32 dims
(4, n, n, n_s, reserved=0), the densities as little-endian float64 in
(beta, x, y, s) row-major order, then one float64 time stamp (ms).
"""

from __future__ import annotations

import numpy as np

from .connectivity import TorusGrid
from .fokker_planck import FieldState

MAGIC = b"GCNF1"


def write_state(state: FieldState, path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        dims = np.array([4, state.grid.n, state.grid.n, state.ns, 0], dtype="<u4")
        fh.write(dims.tobytes())
        fh.write(np.ascontiguousarray(state.f, dtype="<f8").tobytes())
        fh.write(np.float64(state.t).astype("<f8").tobytes())


def read_state(path, s_max: float = 1.3) -> FieldState:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r} in {path}")
        dims = np.frombuffer(fh.read(20), dtype="<u4")
        nb, n, n2, ns, _ = (int(d) for d in dims)
        if nb != 4 or n != n2:
            raise ValueError(f"unexpected dims {tuple(dims)} in {path}")
        f = np.frombuffer(fh.read(nb * n * n * ns * 8), dtype="<f8").reshape(nb, n, n, ns)
        t = float(np.frombuffer(fh.read(8), dtype="<f8")[0])
    return FieldState(f.copy(), TorusGrid(n), s_max, t)


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))  # shortest round-trip representation, byte-stable
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_branch_csv(path, records) -> None:
    write_csv(path, ["sigma", "max_mean", "min_mean", "pattern", "stop_reason", "final_time"],
              [(r.sigma, r.max_mean, r.min_mean, r.pattern, r.stop_reason, r.final_time)
               for r in records])


def write_events_csv(path, events) -> None:
    write_csv(path, ["t_ms", "x_cm", "y_cm", "rate"],
              [(e.t, e.x, e.y, e.rate) for e in events])


def write_dispersion_csv(path, table) -> None:
    write_csv(path, ["k1", "k2", "What", "shift", "F"],
              zip(table.k1.tolist(), table.k2.tolist(), table.what, table.shift, table.F))


def write_refinement_csv(path, rows) -> None:
    write_csv(path, ["n", "L1", "L2", "OOC_L1", "OOC_L2"],
              [(r.n, r.l1, r.l2, r.ooc_l1, r.ooc_l2) for r in rows])


def write_kernel_csv(path, kernel) -> None:
    x = kernel.grid.coords1d()
    rows = []
    for i in range(kernel.grid.n):
        for j in range(kernel.grid.n):
            rows.append((x[i], x[j], kernel.samples[i, j]))
    write_csv(path, ["x", "y", "W"], rows)


def slice_csv(path, state: FieldState, s_value: float, beta: int = 0) -> None:
    """CSV snapshot of f(., ., s*) for the cell containing s_value."""
    j = min(int(s_value / state.ds), state.ns - 1)
    x = state.grid.coords1d()
    rows = []
    for i in range(state.grid.n):
        for k in range(state.grid.n):
            rows.append((x[i], x[k], state.f[beta, i, k, j]))
    write_csv(path, ["x", "y", "f"], rows)
