"""Circular (C2, C4) and hierarchical (H2, H4) view scanning orders.

Each order partitions a square odd-sized view grid into ordered subsets.
Within a subset the views are visited ring by ring (Chebyshev radius from
the centre), clockwise starting from the top, with each ring rotated to start
next to where the previous ring ended.

The 9x9 tables are frozen in ``data/scan_orders_v1.json``; the rules below
regenerate them and extend to other odd grid sizes.
"""

import enum
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .errors import ScanOrderError
from .lightfield import ViewCoord

TABLE_VERSION = 1


class ScanKind(enum.IntEnum):
    C2 = 0
    C4 = 1
    H2 = 2
    H4 = 3

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, int):
            return cls(value)
        try:
            return cls[str(value).upper()]
        except KeyError:
            raise ScanOrderError(f"unknown scan order {value!r}") from None


@dataclass(frozen=True)
class ScanOrder:
    kind: ScanKind
    grid: int
    subsets: tuple

    @property
    def sizes(self):
        return tuple(len(s) for s in self.subsets)

    def all_coords(self):
        return [c for sub in self.subsets for c in sub]


def _ring(c):
    return max(abs(c[0]), abs(c[1]))


def _angle(c):
    # 0 at the top (negative row), increasing clockwise on screen
    return math.atan2(c[1], -c[0]) % (2 * math.pi)


def _chebyshev(a, b):
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def spiral_sort(coords):
    out = []
    for r in sorted({_ring(c) for c in coords}):
        cycle = sorted((c for c in coords if _ring(c) == r), key=_angle)
        if out:
            prev = out[-1]
            i = min(range(len(cycle)), key=lambda j: (_chebyshev(prev, cycle[j]), j))
            cycle = cycle[i:] + cycle[:i]
        out.extend(cycle)
    return [ViewCoord(*c) for c in out]


def _rule_subsets(kind, grid):
    half = grid // 2
    cells = [(s, t) for s in range(-half, half + 1) for t in range(-half, half + 1)]

    def even(c):
        return (c[0] + c[1]) % 2 == 0

    def lattice(c):
        return c[0] % 2 == 0 and c[1] % 2 == 0

    def on_axis(c):
        return c[0] == 0 or c[1] == 0

    if kind is ScanKind.C2:
        rules = [lambda c: even(c) and 1 <= _ring(c) <= 3]
    elif kind is ScanKind.C4:
        rules = [
            lambda c: even(c) and _ring(c) == 1,
            lambda c: (not even(c) and _ring(c) == 1) or (even(c) and _ring(c) == 3),
            lambda c: not even(c) and _ring(c) == 3,
        ]
    elif kind is ScanKind.H2:
        rules = [lattice]
    else:
        rules = [
            lambda c: lattice(c) and _ring(c) == 2 and on_axis(c),
            lambda c: c == (0, 0) or (_ring(c) == 1 and not on_axis(c)),
            lambda c: lattice(c) and _ring(c) == half and half % 2 == 0,
        ]
    subsets = []
    used = set()
    for rule in rules:
        sub = [c for c in cells if c not in used and rule(c)]
        used.update(sub)
        subsets.append(sub)
    subsets.append([c for c in cells if c not in used])
    return subsets


def generate_scan_order(kind, grid):
    """Build a scan order from the rules (no fixture lookup)."""
    kind = ScanKind.parse(kind)
    if grid < 3 or grid % 2 == 0:
        raise ScanOrderError(f"grid size must be odd and >= 3, got {grid}")
    subsets = _rule_subsets(kind, grid)
    if any(len(s) == 0 for s in subsets):
        raise ScanOrderError(f"{kind.name} pattern is not defined for a {grid}x{grid} grid")
    return ScanOrder(kind, grid, tuple(tuple(spiral_sort(s)) for s in subsets))


@lru_cache(maxsize=None)
def _fixture_tables():
    text = resources.files("lfhc").joinpath("data/scan_orders_v1.json").read_text()
    doc = json.loads(text)
    if doc["version"] != TABLE_VERSION:
        raise ScanOrderError(f"unexpected scan table version {doc['version']}")
    return doc


@lru_cache(maxsize=None)
def partition_views(grid, order_kind):
    """Partition a ``grid x grid`` view array into the subsets of ``order_kind``.

    The 9x9 case reads the frozen tables; other odd sizes use the same rules.
    """
    kind = ScanKind.parse(order_kind)
    if grid == 9:
        doc = _fixture_tables()
        subsets = doc["orders"][kind.name]
        return ScanOrder(
            kind, 9, tuple(tuple(ViewCoord(s, t) for s, t in sub) for sub in subsets)
        )
    return generate_scan_order(kind, grid)
