"""Problem instances for service system design under economies of scale.

An instance couples candidate service facilities (fixed opening cost, operating
cost per capacity unit, serving cost per demand unit, per-customer waiting cost)
with customers (Poisson demand rates) and a dense facility-by-customer access
cost matrix. One opening-cost family applies to the whole instance.

Instances are immutable after construction and safe to share across workers.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FAMILIES = ("linear", "square_root", "fractional")

# Default per-capacity operating cost paired with each opening-cost family.
FAMILY_OPERATING_COST = {"linear": 1.0, "square_root": 10.0, "fractional": 100.0}

_FAMILY_ALIASES = {
    "linear": "linear",
    "sqrt": "square_root",
    "square_root": "square_root",
    "square-root": "square_root",
    "fractional": "fractional",
}

FORMAT_TAG = "eosdesign-instance"
FORMAT_VERSION = 1


class InstanceFormatError(ValueError):
    """Raised when an instance file cannot be parsed; carries the line number."""

    def __init__(self, message: str, path=None, line: int | None = None):
        loc = ""
        if path is not None:
            loc = f"{path}:"
        if line is not None:
            loc += f"{line}:"
        super().__init__(f"{loc} {message}" if loc else message)
        self.path = path
        self.line = line


def canonical_family(family: str) -> str:
    try:
        return _FAMILY_ALIASES[family.strip().lower()]
    except KeyError:
        raise ValueError(
            f"unknown cost family {family!r}; expected one of {sorted(set(_FAMILY_ALIASES))}"
        ) from None


@dataclass(frozen=True)
class Facility:
    """A candidate service facility and its cost rates."""

    id: int
    fixed_cost: float
    operating_cost: float
    serving_cost: float
    waiting_cost: float

    def __post_init__(self):
        if not np.isfinite([self.fixed_cost, self.operating_cost,
                            self.serving_cost, self.waiting_cost]).all():
            raise ValueError(f"facility {self.id}: costs must be finite")
        if self.fixed_cost < 0:
            raise ValueError(f"facility {self.id}: fixed_cost must be non-negative")
        if self.operating_cost < 0:
            raise ValueError(f"facility {self.id}: operating_cost must be non-negative")
        if self.serving_cost < 0:
            raise ValueError(f"facility {self.id}: serving_cost must be non-negative")
        if self.waiting_cost <= 0:
            raise ValueError(f"facility {self.id}: waiting_cost must be positive")


@dataclass(frozen=True)
class Customer:
    """A customer with a Poisson demand rate."""

    id: int
    demand_rate: float

    def __post_init__(self):
        if not (np.isfinite(self.demand_rate) and self.demand_rate > 0):
            raise ValueError(f"customer {self.id}: demand_rate must be positive")


@dataclass(frozen=True, eq=False)
class Instance:
    """A full problem instance; validated and frozen at construction."""

    name: str
    facilities: tuple[Facility, ...]
    customers: tuple[Customer, ...]
    access_cost: np.ndarray  # shape (n_facilities, n_customers)
    cost_family: str

    def __post_init__(self):
        object.__setattr__(self, "facilities", tuple(self.facilities))
        object.__setattr__(self, "customers", tuple(self.customers))
        if len(self.facilities) < 1:
            raise ValueError("instance must have at least one facility")
        if len(self.customers) < 1:
            raise ValueError("instance must have at least one customer")
        object.__setattr__(self, "cost_family", canonical_family(self.cost_family))
        a = np.ascontiguousarray(np.asarray(self.access_cost, dtype=float))
        if a.shape != (len(self.facilities), len(self.customers)):
            raise ValueError(
                f"access_cost shape {a.shape} does not match "
                f"({len(self.facilities)}, {len(self.customers)})"
            )
        if not np.isfinite(a).all():
            raise ValueError("access_cost entries must be finite")
        if (a < 0).any():
            raise ValueError("access_cost entries must be non-negative")
        a.setflags(write=False)
        object.__setattr__(self, "access_cost", a)
        for pos, fac in enumerate(self.facilities):
            if fac.id != pos:
                raise ValueError(f"facility ids must be 0..{len(self.facilities) - 1} in order")
        for pos, cust in enumerate(self.customers):
            if cust.id != pos:
                raise ValueError(f"customer ids must be 0..{len(self.customers) - 1} in order")

    # -- derived arrays (cached, read-only) ---------------------------------
    def _vector(self, attr: str, over: str) -> np.ndarray:
        key = f"_cache_{attr}"
        if key not in self.__dict__:
            src = self.facilities if over == "facility" else self.customers
            v = np.array([getattr(x, attr) for x in src], dtype=float)
            v.setflags(write=False)
            self.__dict__[key] = v
        return self.__dict__[key]

    @property
    def n_facilities(self) -> int:
        return len(self.facilities)

    @property
    def n_customers(self) -> int:
        return len(self.customers)

    @property
    def fixed_costs(self) -> np.ndarray:
        return self._vector("fixed_cost", "facility")

    @property
    def operating_costs(self) -> np.ndarray:
        return self._vector("operating_cost", "facility")

    @property
    def serving_costs(self) -> np.ndarray:
        return self._vector("serving_cost", "facility")

    @property
    def waiting_costs(self) -> np.ndarray:
        return self._vector("waiting_cost", "facility")

    @property
    def demand_rates(self) -> np.ndarray:
        return self._vector("demand_rate", "customer")

    @property
    def total_demand(self) -> float:
        return float(self.demand_rates.sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.name == other.name
            and self.cost_family == other.cost_family
            and self.facilities == other.facilities
            and self.customers == other.customers
            and np.array_equal(self.access_cost, other.access_cost)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Solution:
    """A (candidate) design: open set, customer assignment, capacities.

    `assignment[j]` is the facility index serving customer j, or -1 when
    unassigned. Feasible solutions assign every customer to an open facility
    whose capacity strictly exceeds its assigned demand; closed facilities
    carry zero capacity and no assignees.
    """

    open: np.ndarray        # bool, (n_facilities,)
    assignment: np.ndarray  # int, (n_customers,)
    capacity: np.ndarray    # float, (n_facilities,)
    cost: "object | None" = None  # CostBreakdown, attached after evaluation

    def __post_init__(self):
        o = np.asarray(self.open, dtype=bool).copy()
        y = np.asarray(self.assignment, dtype=int).copy()
        mu = np.asarray(self.capacity, dtype=float).copy()
        if o.ndim != 1 or y.ndim != 1 or mu.ndim != 1 or o.shape != mu.shape:
            raise ValueError("solution arrays must be 1-d with matching facility length")
        for arr in (o, y, mu):
            arr.setflags(write=False)
        object.__setattr__(self, "open", o)
        object.__setattr__(self, "assignment", y)
        object.__setattr__(self, "capacity", mu)

    def assigned_demand(self, inst: Instance) -> np.ndarray:
        """Total demand rate assigned to each facility."""
        lam = np.zeros(inst.n_facilities)
        mask = self.assignment >= 0
        np.add.at(lam, self.assignment[mask], inst.demand_rates[mask])
        return lam

    def __eq__(self, other) -> bool:
        if not isinstance(other, Solution):
            return NotImplemented
        return (
            np.array_equal(self.open, other.open)
            and np.array_equal(self.assignment, other.assignment)
            and np.array_equal(self.capacity, other.capacity)
        )

    __hash__ = None


def with_family(inst: Instance, family: str, operating_cost: float | None = None) -> Instance:
    """Copy of `inst` under another opening-cost family.

    All family-independent data (f, s, w, demand rates, access costs) is kept;
    operating costs switch to the family default unless given explicitly.
    """
    family = canonical_family(family)
    c = FAMILY_OPERATING_COST[family] if operating_cost is None else float(operating_cost)
    facs = tuple(replace(f, operating_cost=c) for f in inst.facilities)
    return Instance(inst.name, facs, inst.customers, inst.access_cost, family)


# ---------------------------------------------------------------------------
# Random generation
# ---------------------------------------------------------------------------

def generate_instance(
    n_facilities: int,
    n_customers: int,
    seed: int,
    family: str = "linear",
    *,
    name: str | None = None,
    fixed_cost_range: tuple[float, float] = (1000.0, 4000.0),
    demand_range: tuple[float, float] = (1.0, 20.0),
    serving_range: tuple[float, float] = (1.0, 5.0),
    waiting_range: tuple[float, float] = (50.0, 300.0),
    access_mode: str = "euclidean",
    area_side: float = 8.0,
    access_range: tuple[float, float] = (1.0, 30.0),
    operating_cost: float | None = None,
) -> Instance:
    """Draw a random instance; deterministic for a fixed seed.

    Access costs default to Euclidean distances between facility and customer
    locations drawn uniformly in a square of side `area_side`: like the
    classic facility-location benchmarks, access costs are then correlated
    across facilities, which keeps duality gaps small and lets opening-cost
    economies drive consolidation. `access_mode="uniform"` draws i.i.d.
    access costs from `access_range` instead.

    The draw order is family-independent, so instances generated with the same
    seed but different families share every field except the operating costs
    and the family tag.
    """
    if n_facilities < 1 or n_customers < 1:
        raise ValueError("counts must be at least 1")
    family = canonical_family(family)
    c = FAMILY_OPERATING_COST[family] if operating_cost is None else float(operating_cost)
    rng = np.random.default_rng(seed)
    f = rng.uniform(*fixed_cost_range, n_facilities)
    s = rng.uniform(*serving_range, n_facilities)
    w = rng.uniform(*waiting_range, n_facilities)
    lam = rng.uniform(*demand_range, n_customers)
    if access_mode == "euclidean":
        fac_xy = rng.uniform(0.0, area_side, (n_facilities, 2))
        cust_xy = rng.uniform(0.0, area_side, (n_customers, 2))
        a = np.sqrt(((fac_xy[:, None, :] - cust_xy[None, :, :]) ** 2).sum(axis=2))
    elif access_mode == "uniform":
        a = rng.uniform(*access_range, (n_facilities, n_customers))
    else:
        raise ValueError(f"unknown access_mode {access_mode!r}")
    facs = tuple(
        Facility(i, float(f[i]), c, float(s[i]), float(w[i])) for i in range(n_facilities)
    )
    custs = tuple(Customer(j, float(lam[j])) for j in range(n_customers))
    if name is None:
        name = f"I{n_facilities}J{n_customers}-seed{seed}"
    return Instance(name, facs, custs, a, family)


# (name, n_facilities, n_customers) triples of the bundled benchmark layout:
# sizes span 10-30 facilities and 50-150 customers.
SUITE_SIZES: tuple[tuple[str, int, int], ...] = (
    ("P1", 10, 50), ("P2", 10, 50), ("P3", 10, 50), ("P4", 10, 50),
    ("P13", 20, 50), ("P14", 20, 50), ("P15", 20, 50), ("P16", 20, 50),
    ("P25", 30, 150), ("P26", 30, 150), ("P27", 30, 150), ("P28", 30, 150),
    ("P41", 10, 90), ("P42", 20, 80), ("P43", 30, 70),
    ("P44", 10, 90), ("P45", 20, 80), ("P46", 30, 70),
    ("P47", 10, 90), ("P48", 20, 80), ("P49", 30, 70),
    ("P50", 10, 100), ("P51", 10, 100), ("P52", 10, 100),
    ("P53", 20, 100), ("P54", 10, 100), ("P55", 20, 100),
)


def generate_suite(seed: int, family: str = "linear", **ranges) -> list[Instance]:
    """Generate the bundled 27-instance suite, one sub-seed per instance."""
    return [
        generate_instance(ni, nj, seed + idx, family, name=nm, **ranges)
        for idx, (nm, ni, nj) in enumerate(SUITE_SIZES)
    ]


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def write_instance(inst: Instance, path) -> None:
    """Write `inst` as self-describing structured text; lossless round-trip."""
    lines = [f"{FORMAT_TAG} {FORMAT_VERSION}"]
    lines.append(f"name {inst.name}")
    lines.append(f"family {inst.cost_family}")
    lines.append(f"facilities {inst.n_facilities}")
    lines.append(f"customers {inst.n_customers}")
    for f in inst.facilities:
        lines.append(
            f"facility {f.id} {f.fixed_cost!r} {f.operating_cost!r} "
            f"{f.serving_cost!r} {f.waiting_cost!r}"
        )
    for cst in inst.customers:
        lines.append(f"customer {cst.id} {cst.demand_rate!r}")
    for i in range(inst.n_facilities):
        row = " ".join(repr(float(v)) for v in inst.access_cost[i])
        lines.append(f"access {i} {row}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_float(token: str, what: str, path, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise InstanceFormatError(f"{what}: not a number: {token!r}", path, lineno) from None


def _parse_int(token: str, what: str, path, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise InstanceFormatError(f"{what}: not an integer: {token!r}", path, lineno) from None


def read_instance(path) -> Instance:
    """Parse an instance file written by `write_instance`.

    Raises `InstanceFormatError` with the offending line for malformed input;
    domain invariant violations surface as `ValueError` naming the field.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    name = None
    family = None
    n_fac = n_cust = None
    fac_rows: dict[int, tuple] = {}
    cust_rows: dict[int, float] = {}
    access_rows: dict[int, list[float]] = {}
    first = True
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if first:
            if parts[0] != FORMAT_TAG:
                raise InstanceFormatError(
                    f"expected header {FORMAT_TAG!r}, got {parts[0]!r}", path, lineno)
            first = False
            continue
        kind = parts[0]
        if kind == "name":
            name = line.split(None, 1)[1] if len(parts) > 1 else ""
        elif kind == "family":
            if len(parts) != 2:
                raise InstanceFormatError("family: expected one value", path, lineno)
            family = parts[1]
        elif kind == "facilities":
            n_fac = _parse_int(parts[1], "facilities", path, lineno)
        elif kind == "customers":
            n_cust = _parse_int(parts[1], "customers", path, lineno)
        elif kind == "facility":
            if len(parts) != 6:
                raise InstanceFormatError(
                    "facility: expected 'facility ID F C S W'", path, lineno)
            i = _parse_int(parts[1], "facility id", path, lineno)
            vals = tuple(
                _parse_float(tok, f"facility {i} field {n}", path, lineno)
                for n, tok in enumerate(parts[2:], start=1)
            )
            fac_rows[i] = vals
        elif kind == "customer":
            if len(parts) != 3:
                raise InstanceFormatError(
                    "customer: expected 'customer ID RATE'", path, lineno)
            j = _parse_int(parts[1], "customer id", path, lineno)
            cust_rows[j] = _parse_float(parts[2], f"customer {j} demand_rate", path, lineno)
        elif kind == "access":
            i = _parse_int(parts[1], "access row id", path, lineno)
            access_rows[i] = [
                _parse_float(tok, f"access[{i}][{n}]", path, lineno)
                for n, tok in enumerate(parts[2:])
            ]
        else:
            raise InstanceFormatError(f"unknown record kind {kind!r}", path, lineno)
    if first:
        raise InstanceFormatError("empty file", path, 1)
    for what, val in (("name", name), ("family", family),
                      ("facilities", n_fac), ("customers", n_cust)):
        if val is None:
            raise InstanceFormatError(f"missing {what} header", path)
    if sorted(fac_rows) != list(range(n_fac)):
        raise InstanceFormatError(
            f"expected facility records 0..{n_fac - 1}, got {sorted(fac_rows)}", path)
    if sorted(cust_rows) != list(range(n_cust)):
        raise InstanceFormatError(
            f"expected customer records 0..{n_cust - 1}, got {sorted(cust_rows)}", path)
    if sorted(access_rows) != list(range(n_fac)):
        raise InstanceFormatError(
            f"expected access rows 0..{n_fac - 1}, got {sorted(access_rows)}", path)
    for i, row in access_rows.items():
        if len(row) != n_cust:
            raise InstanceFormatError(
                f"access row {i}: expected {n_cust} entries, got {len(row)}", path)
    facs = tuple(Facility(i, *fac_rows[i]) for i in range(n_fac))
    custs = tuple(Customer(j, cust_rows[j]) for j in range(n_cust))
    a = np.array([access_rows[i] for i in range(n_fac)], dtype=float)
    return Instance(name, facs, custs, a, family)


def convert_holmberg(
    path,
    seed: int,
    family: str = "linear",
    *,
    name: str | None = None,
    serving_range: tuple[float, float] = (1.0, 5.0),
    waiting_range: tuple[float, float] = (50.0, 300.0),
    operating_cost: float | None = None,
) -> Instance:
    """Convert a legacy capacitated-facility-location file to an Instance.

    Expected layout (whitespace/newline flexible): ``n m``, then n pairs
    ``capacity fixed_cost`` (capacities ignored; they are decision variables
    here), then m customer demands, then the n-by-m assignment-cost matrix,
    used verbatim as the access costs. Serving and waiting costs are drawn
    from the given ranges with the given seed.
    """
    path = Path(path)
    toks = path.read_text(encoding="utf-8").split()
    pos = 0

    def take(what: str) -> str:
        nonlocal pos
        if pos >= len(toks):
            raise InstanceFormatError(f"truncated file while reading {what}", path)
        tok = toks[pos]
        pos += 1
        return tok

    n = _parse_int(take("facility count"), "facility count", path, 1)
    m = _parse_int(take("customer count"), "customer count", path, 1)
    fixed = []
    for i in range(n):
        take(f"capacity of facility {i}")
        fixed.append(_parse_float(take(f"fixed cost of facility {i}"),
                                  f"fixed cost of facility {i}", path, 1))
    demands = [_parse_float(take(f"demand of customer {j}"),
                            f"demand of customer {j}", path, 1) for j in range(m)]
    a = np.array([
        [_parse_float(take(f"cost[{i}][{j}]"), f"cost[{i}][{j}]", path, 1)
         for j in range(m)]
        for i in range(n)
    ])
    if pos != len(toks):
        raise InstanceFormatError(f"{len(toks) - pos} trailing tokens", path)
    family = canonical_family(family)
    c = FAMILY_OPERATING_COST[family] if operating_cost is None else float(operating_cost)
    rng = np.random.default_rng(seed)
    s = rng.uniform(*serving_range, n)
    w = rng.uniform(*waiting_range, n)
    facs = tuple(Facility(i, fixed[i], c, float(s[i]), float(w[i])) for i in range(n))
    custs = tuple(Customer(j, demands[j]) for j in range(m))
    if name is None:
        name = path.stem
    return Instance(name, facs, custs, a, family)
