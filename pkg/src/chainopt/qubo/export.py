"""COO text export of a compiled model with a JSON metadata sidecar."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import QuboModel


def coo_lines(model: QuboModel) -> str:
    m = model.qubo.matrix.tocoo()
    order = np.lexsort((m.col, m.row))
    return "".join(f"{m.row[t]} {m.col[t]} {float(m.data[t])!r}\n" for t in order)


def layout_metadata(model: QuboModel) -> dict:
    lay = model.layout
    free = lay.full_to_free
    variables = []
    for p in lay.parts:
        for a in ((0,) if lay.aliased[p] else (0, 1)):
            for o, (k, u) in enumerate(lay.options[p]):
                full = int(lay.slots[p][a][o])
                variables.append({"index": int(free[full]), "part": p, "site": k, "supplier": u,
                                  "source": a + 1, "aliased": lay.aliased[p],
                                  "fixed": lay.fixed.get(full)})
    ancillas = [{"family": g.family, "entity": g.entity, "bits": g.bits,
                 "first_index": int(free[g.start]) if g.bits else None, "bound": g.bound,
                 "active": g.active} for g in lay.groups]
    return {
        "n": model.n, "N_y": lay.N_y, "N_z": lay.N_z, "offset": model.qubo.offset,
        "w": list(model.weights.w), "lambda": list(model.multipliers.lam),
        "R": model.rational.R, "Rbar": model.rational.Rbar,
        "P": model.rational.P.tolist(), "Pbar": model.rational.Pbar.tolist(),
        "d": model.scales.tolist(), "variables": variables, "ancillas": ancillas,
    }


def export_model(model: QuboModel, path) -> tuple[Path, Path]:
    """Write ``<path>.coo`` (``i j value`` rows, row-major) and ``<path>.json``."""
    base = Path(path)
    coo = base.with_suffix(".coo")
    meta = base.with_suffix(".json")
    coo.write_text(coo_lines(model))
    meta.write_text(json.dumps(layout_metadata(model), indent=1) + "\n")
    return coo, meta


def load_coo(path, n: int | None = None):
    from .core import Qubo
    rows, cols, vals = [], [], []
    for line in Path(path).read_text().splitlines():
        i, j, v = line.split()
        rows.append(int(i))
        cols.append(int(j))
        vals.append(float(v))
    size = n if n is not None else (max(rows + cols) + 1 if rows else 0)
    return Qubo.from_terms(size, 0.0, np.zeros(size), rows, cols, vals)
