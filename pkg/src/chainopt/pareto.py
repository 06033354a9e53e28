"""Non-dominated filtering and exact hypervolume for KPI vectors (minimisation)."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

REFERENCE = (3.0, 5.0, 4.5, 5.5)


@dataclass(frozen=True)
class KpiPoint:
    kpis: tuple[float, float, float, float]
    solution_id: str = ""
    weights: tuple[float, float, float, float] | None = None
    feasible: bool = True

    def __post_init__(self):
        if len(self.kpis) != 4 or not all(np.isfinite(self.kpis)) or min(self.kpis) < 0:
            raise ValueError(f"KPI vector must hold four finite non-negative values, got {self.kpis}")


def _array(points) -> np.ndarray:
    pts = [p.kpis if isinstance(p, KpiPoint) else p for p in points]
    if not pts:
        return np.zeros((0, 4))
    return np.asarray(pts, dtype=float).reshape(len(pts), -1)


def nondominated_mask(values) -> np.ndarray:
    """True where no other row is <= componentwise and different; only the first of equal rows is kept."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        le = np.all(v <= v[i], axis=1)
        strictly = le & np.any(v < v[i], axis=1)
        dup = le & np.all(v == v[i], axis=1)
        dup[i:] = False
        if strictly.any() or dup.any():
            keep[i] = False
    return keep


def pareto_filter(points):
    """Non-dominated subset in input order; duplicates appear once."""
    points = list(points)
    if not points:
        return []
    mask = nondominated_mask(_array(points))
    return [p for p, k in zip(points, mask) if k]


def projected_pareto(points, dims: tuple[int, int]):
    """Non-domination on two KPI components (1-based); equal projections are all kept."""
    a, b = dims
    if a == b or not {a, b} <= {1, 2, 3, 4}:
        raise ValueError(f"dims must be two distinct values in 1..4, got {dims}")
    points = list(points)
    if not points:
        return []
    v = _array(points)[:, [a - 1, b - 1]]
    keep = [not np.any(np.all(v <= row, axis=1) & np.any(v < row, axis=1)) for row in v]
    return [p for p, k in zip(points, keep) if k]


def _hv2(pts: np.ndarray, ref) -> float:
    # staircase sweep in x; the height is set by the lowest y seen so far
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    total, y_best = 0.0, ref[1]
    for i in range(len(pts)):
        y_best = min(y_best, pts[i, 1])
        x_next = pts[i + 1, 0] if i + 1 < len(pts) else ref[0]
        total += (x_next - pts[i, 0]) * (ref[1] - y_best)
    return total


def _hv(pts: np.ndarray, ref: np.ndarray) -> float:
    if len(pts) == 0:
        return 0.0
    d = pts.shape[1]
    if d == 1:
        return float(ref[0] - pts[:, 0].min())
    if d == 2:
        return _hv2(pts, ref)
    pts = pts[np.argsort(pts[:, -1], kind="stable")]
    total = 0.0
    for i in range(len(pts)):
        top = pts[i + 1, -1] if i + 1 < len(pts) else ref[-1]
        depth = top - pts[i, -1]
        if depth <= 0:
            continue
        sl = pts[: i + 1, :-1]
        sl = sl[nondominated_mask(sl)]
        total += depth * _hv(sl, ref[:-1])
    return total


def hypervolume(points, reference=REFERENCE) -> float:
    """Exact volume dominated by ``points`` inside the box bounded by ``reference``.

    Points that do not strictly dominate the reference are dropped with a warning.
    """
    ref = np.asarray(reference, dtype=float)
    v = _array(list(points))
    if v.size == 0:
        return 0.0
    inside = np.all(v < ref, axis=1)
    if not inside.all():
        log.warning("%d point(s) outside the reference box were ignored", int((~inside).sum()))
    v = v[inside]
    if len(v) == 0:
        return 0.0
    return float(_hv(v[nondominated_mask(v)], ref))


def nadir_reference(points, margin: float = 0.1) -> tuple[float, ...]:
    """Componentwise maximum widened by ``margin`` (relative), for data far from the default box."""
    v = _array(list(points))
    if len(v) == 0:
        return REFERENCE
    top = v.max(axis=0)
    return tuple(float(t * (1 + margin)) if t > 0 else float(margin) for t in top)


# -- CSV ---------------------------------------------------------------------

COLUMNS = ["w1", "w2", "w3", "w4", "c1", "c2", "c3", "c4", "solution_id", "feasible"]


def points_to_csv(points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for p in points:
        ws = p.weights if p.weights is not None else ("",) * 4
        w.writerow([*(repr(float(x)) if x != "" else "" for x in ws), *(repr(float(c)) for c in p.kpis),
                    p.solution_id, int(p.feasible)])
    return buf.getvalue()


def points_from_csv(text: str) -> list[KpiPoint]:
    rows = csv.DictReader(io.StringIO(text))
    out = []
    for r in rows:
        ws = tuple(float(r[f"w{i}"]) for i in range(1, 5)) if r.get("w1") else None
        out.append(KpiPoint(tuple(float(r[f"c{i}"]) for i in range(1, 5)), r.get("solution_id", ""),
                            ws, r.get("feasible", "1") in ("1", "True", "true")))
    return out
