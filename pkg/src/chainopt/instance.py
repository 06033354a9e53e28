"""Problem-instance data model, JSON I/O, PBS levels and a synthetic generator."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path

import numpy as np


class InstanceError(ValueError):
    """Raised when an instance file cannot be parsed or violates an invariant."""


class GenerationError(ValueError):
    """Raised when synthetic-generator parameters cannot produce a valid instance."""


@dataclass(frozen=True)
class Part:
    id: str
    value: float
    volume: float
    parent: str | None
    alpha: float


@dataclass(frozen=True)
class Site:
    id: str
    region: str
    ws_min: int
    ws_max: int


@dataclass(frozen=True)
class Supplier:
    id: str
    ws_min: int
    ws_max: int
    ws_target: int


@dataclass(frozen=True)
class TransportMethod:
    id: str
    part: str
    origin: str
    destination: str
    c1: float
    c2: float
    c3: float
    cargo_volume: float

    def kpi(self, n: int) -> float:
        return (self.c1, self.c2, self.c3)[n - 1]


@dataclass(frozen=True)
class FeasibleOption:
    part: str
    site: str
    supplier: str
    production_time: float = 0.0


@dataclass(frozen=True)
class ProblemInstance:
    parts: tuple[Part, ...]
    sites: tuple[Site, ...]
    warehouses: tuple[str, ...]
    suppliers: tuple[Supplier, ...]
    regions: tuple[str, ...]
    transport: tuple[TransportMethod, ...]
    feasible: tuple[FeasibleOption, ...]

    # -- lookups -----------------------------------------------------------
    @cached_property
    def part_by_id(self) -> dict[str, Part]:
        return {p.id: p for p in self.parts}

    @cached_property
    def site_by_id(self) -> dict[str, Site]:
        return {s.id: s for s in self.sites}

    @cached_property
    def supplier_by_id(self) -> dict[str, Supplier]:
        return {u.id: u for u in self.suppliers}

    @cached_property
    def root(self) -> str:
        return next(p.id for p in self.parts if p.parent is None)

    @cached_property
    def children(self) -> dict[str, tuple[str, ...]]:
        kids: dict[str, list[str]] = {p.id: [] for p in self.parts}
        for p in self.parts:
            if p.parent is not None:
                kids[p.parent].append(p.id)
        return {k: tuple(v) for k, v in kids.items()}

    @cached_property
    def edges(self) -> tuple[tuple[str, str], ...]:
        """Dependency tuples (child, parent)."""
        return tuple((p.id, p.parent) for p in self.parts if p.parent is not None)

    @cached_property
    def levels(self) -> dict[str, int]:
        return part_levels(self)

    @cached_property
    def total_value(self) -> float:
        return math.fsum(p.value for p in self.parts)

    @cached_property
    def relative_values(self) -> dict[str, float]:
        """Relative value v_i in percent."""
        total = self.total_value
        return {p.id: 100.0 * p.value / total for p in self.parts}

    @cached_property
    def options(self) -> dict[str, tuple[FeasibleOption, ...]]:
        opts: dict[str, list[FeasibleOption]] = {p.id: [] for p in self.parts}
        for f in self.feasible:
            opts[f.part].append(f)
        return {k: tuple(v) for k, v in opts.items()}

    @cached_property
    def methods_by_part(self) -> dict[str, tuple[TransportMethod, ...]]:
        by: dict[str, list[TransportMethod]] = {p.id: [] for p in self.parts}
        for m in self.transport:
            by[m.part].append(m)
        return {k: tuple(v) for k, v in by.items()}

    @cached_property
    def nodes(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.sites) + tuple(self.warehouses)

    @cached_property
    def immobile(self) -> dict[str, bool]:
        """True for parts with no route between any two distinct production sites."""
        site_ids = set(self.site_by_id)
        flags = {}
        for p in self.parts:
            adj: dict[str, set[str]] = {}
            for m in self.methods_by_part[p.id]:
                adj.setdefault(m.origin, set()).add(m.destination)
            mobile = False
            for start in site_ids & set(adj):
                seen = {start}
                queue = deque([start])
                while queue and not mobile:
                    node = queue.popleft()
                    for nxt in adj.get(node, ()):
                        if nxt in seen:
                            continue
                        if nxt in site_ids:
                            mobile = True
                            break
                        seen.add(nxt)
                        queue.append(nxt)
                if mobile:
                    break
            flags[p.id] = not mobile
        return flags

    def assignable_sites(self, part: str) -> tuple[str, ...]:
        return tuple(dict.fromkeys(f.site for f in self.options[part]))

    def assignable_regions(self, part: str) -> tuple[str, ...]:
        return tuple(dict.fromkeys(self.site_by_id[k].region for k in self.assignable_sites(part)))

    def with_alpha(self, alpha: float | dict[str, float]) -> "ProblemInstance":
        """Copy of the instance with new primary source shares."""
        if isinstance(alpha, dict):
            parts = tuple(_replace_part(p, alpha=alpha.get(p.id, p.alpha)) for p in self.parts)
        else:
            parts = tuple(_replace_part(p, alpha=float(alpha)) for p in self.parts)
        out = ProblemInstance(parts, self.sites, self.warehouses, self.suppliers,
                              self.regions, self.transport, self.feasible)
        validate(out)
        return out

    def replace(self, **changes) -> "ProblemInstance":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update({k: tuple(v) for k, v in changes.items()})
        out = ProblemInstance(**data)
        validate(out)
        return out


def _replace_part(p: Part, **kw) -> Part:
    d = asdict(p)
    d.update(kw)
    return Part(**d)


# -- levels ------------------------------------------------------------------

def part_levels(instance: ProblemInstance) -> dict[str, int]:
    """Number of production steps from each part to the final product (root = 0)."""
    parent = {p.id: p.parent for p in instance.parts}
    levels: dict[str, int] = {}
    for pid in parent:
        chain = []
        node = pid
        while node is not None and node not in levels:
            if node in chain:
                raise InstanceError(f"cycle in product breakdown structure through part {node!r}")
            chain.append(node)
            node = parent[node]
        base = -1 if node is None else levels[node]
        for depth, n in enumerate(reversed(chain), start=1):
            levels[n] = base + depth
    return levels


# -- validation --------------------------------------------------------------

def _unique(ids, what):
    seen = set()
    for i in ids:
        if i in seen:
            raise InstanceError(f"duplicate {what} id {i!r}")
        seen.add(i)
    return seen


def validate(inst: ProblemInstance) -> None:
    part_ids = _unique((p.id for p in inst.parts), "part")
    site_ids = _unique((s.id for s in inst.sites), "site")
    wh_ids = _unique(inst.warehouses, "warehouse")
    sup_ids = _unique((u.id for u in inst.suppliers), "supplier")
    reg_ids = _unique(inst.regions, "region")
    _unique((m.id for m in inst.transport), "transport")
    if not inst.parts:
        raise InstanceError("instance has no parts")
    if site_ids & wh_ids:
        raise InstanceError(f"site and warehouse ids overlap: {sorted(site_ids & wh_ids)}")

    roots = [p.id for p in inst.parts if p.parent is None]
    if len(roots) != 1:
        raise InstanceError(f"product breakdown structure needs exactly one root, found {roots}")
    for p in inst.parts:
        if not p.value > 0:
            raise InstanceError(f"part {p.id!r}: value must be positive")
        if not p.volume > 0:
            raise InstanceError(f"part {p.id!r}: volume must be positive")
        if not 0.5 <= p.alpha <= 1.0:
            raise InstanceError(f"part {p.id!r}: alpha {p.alpha} outside [0.5, 1]")
        if p.parent is not None and p.parent not in part_ids:
            raise InstanceError(f"part {p.id!r}: unknown parent {p.parent!r}")
    part_levels(inst)  # raises on cycles

    for s in inst.sites:
        if s.region not in reg_ids:
            raise InstanceError(f"site {s.id!r}: unknown region {s.region!r}")
        if not (0 <= s.ws_min <= s.ws_max <= 100):
            raise InstanceError(f"site {s.id!r}: workshare window [{s.ws_min}, {s.ws_max}] invalid")
    for u in inst.suppliers:
        if not (0 <= u.ws_min <= u.ws_target <= u.ws_max <= 100):
            raise InstanceError(
                f"supplier {u.id!r}: need 0 <= min <= target <= max <= 100, "
                f"got {u.ws_min}/{u.ws_target}/{u.ws_max}")

    nodes = site_ids | wh_ids
    for m in inst.transport:
        if m.part not in part_ids:
            raise InstanceError(f"transport {m.id!r}: unknown part {m.part!r}")
        for end in (m.origin, m.destination):
            if end not in nodes:
                raise InstanceError(f"transport {m.id!r}: unknown node {end!r}")
        if m.origin == m.destination:
            raise InstanceError(f"transport {m.id!r}: self-loop at {m.origin!r}")
        if min(m.c1, m.c2, m.c3) < 0:
            raise InstanceError(f"transport {m.id!r}: negative KPI contribution")
        vol = inst.part_by_id[m.part].volume
        if not m.cargo_volume >= vol:
            raise InstanceError(f"transport {m.id!r}: cargo volume {m.cargo_volume} below part volume {vol}")

    seen_opts = set()
    for f in inst.feasible:
        if f.part not in part_ids:
            raise InstanceError(f"feasible option: unknown part {f.part!r}")
        if f.site not in site_ids:
            raise InstanceError(f"feasible option for {f.part!r}: unknown site {f.site!r}")
        if f.supplier not in sup_ids:
            raise InstanceError(f"feasible option for {f.part!r}: unknown supplier {f.supplier!r}")
        if f.production_time < 0:
            raise InstanceError(f"feasible option for {f.part!r}: negative production time")
        key = (f.part, f.site, f.supplier)
        if key in seen_opts:
            raise InstanceError(f"duplicate feasible option {key}")
        seen_opts.add(key)
    have = {f.part for f in inst.feasible}
    for pid in part_ids - have:
        raise InstanceError(f"part {pid!r} has no feasible site-supplier option")


# -- JSON --------------------------------------------------------------------

def to_dict(inst: ProblemInstance) -> dict:
    return {
        "parts": [asdict(p) for p in inst.parts],
        "sites": [asdict(s) for s in inst.sites],
        "warehouses": list(inst.warehouses),
        "suppliers": [asdict(u) for u in inst.suppliers],
        "regions": list(inst.regions),
        "transport": [
            {"id": m.id, "part": m.part, "from": m.origin, "to": m.destination,
             "c1": m.c1, "c2": m.c2, "c3": m.c3, "cargo_volume": m.cargo_volume}
            for m in inst.transport
        ],
        "feasible": [asdict(f) for f in inst.feasible],
    }


def from_dict(data: dict) -> ProblemInstance:
    try:
        inst = ProblemInstance(
            parts=tuple(Part(str(p["id"]), float(p["value"]), float(p["volume"]),
                             None if p.get("parent") is None else str(p["parent"]),
                             float(p.get("alpha", 1.0))) for p in data["parts"]),
            sites=tuple(Site(str(s["id"]), str(s["region"]), int(s["ws_min"]), int(s["ws_max"]))
                        for s in data["sites"]),
            warehouses=tuple(str(w) for w in data.get("warehouses", [])),
            suppliers=tuple(Supplier(str(u["id"]), int(u["ws_min"]), int(u["ws_max"]), int(u["ws_target"]))
                            for u in data["suppliers"]),
            regions=tuple(str(r) for r in data["regions"]),
            transport=tuple(TransportMethod(str(m["id"]), str(m["part"]), str(m["from"]), str(m["to"]),
                                            float(m["c1"]), float(m["c2"]), float(m["c3"]),
                                            float(m["cargo_volume"]))
                            for m in data.get("transport", [])),
            feasible=tuple(FeasibleOption(str(f["part"]), str(f["site"]), str(f["supplier"]),
                                          float(f.get("production_time", 0.0)))
                           for f in data["feasible"]),
        )
    except KeyError as exc:
        raise InstanceError(f"missing required key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"malformed field: {exc}") from None
    validate(inst)
    return inst


def dumps(inst: ProblemInstance) -> str:
    return json.dumps(to_dict(inst), indent=1) + "\n"


def loads(text: str) -> ProblemInstance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if exc.lineno - 1 < len(text.splitlines()) else ""
        raise InstanceError(f"JSON parse error at line {exc.lineno}, column {exc.colno}: "
                            f"{exc.msg}\n    {line.strip()}") from None
    return from_dict(data)


def load_instance(path) -> ProblemInstance:
    return loads(Path(path).read_text())


def save_instance(inst: ProblemInstance, path) -> None:
    Path(path).write_text(dumps(inst))


# -- synthetic generator -----------------------------------------------------

def generate_synthetic(n_parts: int, n_sites: int, n_suppliers: int, n_warehouses: int,
                       n_regions: int, edge_density: float, alpha: float, seed: int,
                       *, max_depth: int = 4, margin: int | None = None,
                       spread: float = 0.5) -> ProblemInstance:
    """Random desk-scale instance with a planted feasible assignment.

    The planted assignment double-sources every part when there are at least two
    sites (in distinct regions whenever two regions exist), ships each child to
    both parent sites.  Each workshare window is centred on the planted share,
    widened by the relative ``spread`` and by ``margin`` percentage points so that
    the rounded integer windows (value denominator 10, share denominator 5)
    still admit it.
    """
    if min(n_parts, n_sites, n_suppliers, n_regions) < 1 or n_warehouses < 0:
        raise GenerationError("counts must be >= 1 (warehouses >= 0)")
    if not 0 < edge_density <= 1:
        raise GenerationError("edge_density must lie in (0, 1]")
    if not 0.5 <= alpha <= 1:
        raise GenerationError("alpha must lie in [0.5, 1]")
    if spread < 0:
        raise GenerationError("spread must be non-negative")
    if n_regions > n_sites:
        raise GenerationError("more regions than sites")
    rng = np.random.default_rng(seed)
    if margin is None:
        pbar = min(5, max(3, round(alpha * 5)))
        margin = 1 + math.ceil(0.05 * n_parts) + math.ceil(100 * abs(alpha - pbar / 5))

    regions = [f"V{r}" for r in range(n_regions)]
    site_region = [regions[k % n_regions] for k in range(n_sites)]
    site_ids = [f"K{k}" for k in range(n_sites)]
    wh_ids = [f"W{w}" for w in range(n_warehouses)]
    sup_ids = [f"U{u}" for u in range(n_suppliers)]
    part_ids = [f"P{i}" for i in range(n_parts)]

    parents: list[int | None] = [None]
    depth = [0]
    for i in range(1, n_parts):
        allowed = [j for j in range(i) if depth[j] < max_depth]
        j = int(rng.choice(allowed))
        parents.append(j)
        depth.append(depth[j] + 1)
    values = np.round(rng.uniform(1.0, 10.0, n_parts), 2)
    volumes = np.round(rng.uniform(0.5, 5.0, n_parts), 3)
    rel = 100.0 * values / values.sum()

    # planted primary / secondary (site, supplier)
    planted: list[list[tuple[int, int]]] = []
    for i in range(n_parts):
        k1 = int(rng.integers(n_sites))
        u1 = int(rng.integers(n_suppliers))
        if n_sites == 1:
            planted.append([(k1, u1)])
            continue
        cand = [k for k in range(n_sites) if k != k1 and site_region[k] != site_region[k1]]
        if not cand:
            cand = [k for k in range(n_sites) if k != k1]
        k2 = int(rng.choice(cand))
        u2 = int(rng.integers(n_suppliers))
        planted.append([(k1, u1), (k2, u2)])

    feasible = []
    for i in range(n_parts):
        opts = dict.fromkeys(planted[i])
        for k in range(n_sites):
            if rng.random() < edge_density:
                opts.setdefault((k, int(rng.integers(n_suppliers))))
        for k, u in sorted(opts):
            feasible.append(FeasibleOption(part_ids[i], site_ids[k], sup_ids[u],
                                           float(np.round(rng.uniform(1, 20), 2))))

    nodes = site_ids + wh_ids
    transport = []

    def add_method(i, p, q):
        vol = volumes[i]
        transport.append(TransportMethod(
            f"M{len(transport)}", part_ids[i], p, q,
            float(np.round(rng.uniform(1, 100), 2)), float(np.round(rng.uniform(1, 100), 2)),
            float(np.round(rng.uniform(1, 10), 2)),
            float(np.round(vol * rng.uniform(1.0, 20.0), 3))))

    for i in range(1, n_parts):
        if n_sites == 1:
            continue
        have = set()
        for p in nodes:
            for q in nodes:
                if p != q and rng.random() < edge_density * 0.5:
                    add_method(i, p, q)
                    have.add((p, q))
        adj: dict[str, set[str]] = {}
        for p, q in have:
            adj.setdefault(p, set()).add(q)
        for k, _ in planted[i]:
            for l, _ in planted[parents[i]]:
                if k == l or _reaches(adj, site_ids[k], site_ids[l]):
                    continue
                if wh_ids and rng.random() < 0.5:
                    w = wh_ids[int(rng.integers(len(wh_ids)))]
                    hops = [(site_ids[k], w), (w, site_ids[l])]
                else:
                    hops = [(site_ids[k], site_ids[l])]
                for p, q in hops:
                    add_method(i, p, q)
                    adj.setdefault(p, set()).add(q)

    alpha_a = (alpha, 1.0 - alpha)
    site_ws = np.zeros(n_sites)
    sup_ws = np.zeros(n_suppliers)
    for i in range(n_parts):
        srcs = planted[i]
        if len(srcs) == 1:
            k, u = srcs[0]
            site_ws[k] += rel[i]
            sup_ws[u] += rel[i]
        else:
            for a, (k, u) in enumerate(srcs):
                site_ws[k] += rel[i] * alpha_a[a]
                sup_ws[u] += rel[i] * alpha_a[a]

    def window(share):
        lo = max(0, math.floor(share * (1 - spread)) - margin - int(rng.integers(0, 3)))
        hi = min(100, math.ceil(share * (1 + spread)) + margin + int(rng.integers(0, 3)))
        if share > 100 + 1e-9:
            raise GenerationError("planted workshare exceeds 100 percent")
        return lo, hi

    sites = []
    for k in range(n_sites):
        lo, hi = window(site_ws[k])
        sites.append(Site(site_ids[k], site_region[k], lo, hi))
    suppliers = []
    for u in range(n_suppliers):
        lo, hi = window(sup_ws[u])
        target = int(min(hi, max(lo, round(sup_ws[u] + rng.integers(-3, 4)))))
        suppliers.append(Supplier(sup_ids[u], lo, hi, target))

    parts = tuple(Part(part_ids[i], float(values[i]), float(volumes[i]),
                       None if parents[i] is None else part_ids[parents[i]], float(alpha))
                  for i in range(n_parts))
    inst = ProblemInstance(parts, tuple(sites), tuple(wh_ids), tuple(suppliers), tuple(regions),
                           tuple(transport), tuple(feasible))
    validate(inst)
    _check_planted(inst, planted, rel)
    return inst


def _check_planted(inst: ProblemInstance, planted, rel, R: int = 10, Rbar: int = 5) -> None:
    """Confirm the planted solution meets the integer workshare windows at default denominators."""
    P = np.rint(rel * R).astype(np.int64)
    alpha = np.array([p.alpha for p in inst.parts])
    Pbar = np.clip(np.rint(alpha * Rbar), math.ceil(Rbar / 2), Rbar).astype(np.int64)
    site_load = np.zeros(len(inst.sites), dtype=np.int64)
    sup_load = np.zeros(len(inst.suppliers), dtype=np.int64)
    for i, srcs in enumerate(planted):
        shares = [Rbar] if len(srcs) == 1 else [Pbar[i], Rbar - Pbar[i]]
        for (k, u), d in zip(srcs, shares):
            site_load[k] += P[i] * d
            sup_load[u] += P[i] * d
    for s, load in zip(inst.sites, site_load):
        if not s.ws_min * R * Rbar <= load <= s.ws_max * R * Rbar:
            raise GenerationError(f"window of site {s.id} cannot admit the planted solution")
    for u, load in zip(inst.suppliers, sup_load):
        if not u.ws_min * R * Rbar <= load <= u.ws_max * R * Rbar:
            raise GenerationError(f"window of supplier {u.id} cannot admit the planted solution")


def _reaches(adj: dict[str, set[str]], src: str, dst: str) -> bool:
    seen = {src}
    queue = deque([src])
    while queue:
        node = queue.popleft()
        if node == dst:
            return True
        for nxt in adj.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return False
