import numpy as np
import pytest

from lfhc.errors import ScanOrderError
from lfhc.lightfield import ViewCoord
from lfhc.scan import ScanKind, generate_scan_order, partition_views, spiral_sort

SIZES = {"C2": (24, 57), "H2": (25, 56), "C4": (4, 16, 12, 49), "H4": (4, 5, 16, 56)}


@pytest.mark.parametrize("kind", list(SIZES))
def test_partition_sizes(kind):
    assert partition_views(9, kind).sizes == SIZES[kind]


@pytest.mark.parametrize("kind", list(SIZES))
def test_partition_covers_grid_once(kind):
    coords = partition_views(9, kind).all_coords()
    assert len(coords) == 81 == len(set(coords))
    assert all(max(abs(s), abs(t)) <= 4 for s, t in coords)


@pytest.mark.parametrize("kind", list(SIZES))
def test_frozen_tables_match_rules(kind):
    assert partition_views(9, kind).subsets == generate_scan_order(kind, 9).subsets


@pytest.mark.parametrize("kind", list(SIZES))
def test_spiral_order_is_ring_by_ring_and_local(kind):
    for subset in partition_views(9, kind).subsets:
        rings = [max(abs(s), abs(t)) for s, t in subset]
        assert rings == sorted(rings)
        for a, b in zip(subset, subset[1:]):
            assert max(abs(a[0] - b[0]), abs(a[1] - b[1])) <= 2


def test_spiral_starts_at_top_and_runs_clockwise():
    ring = [(s, t) for s in (-1, 0, 1) for t in (-1, 0, 1) if (s, t) != (0, 0)]
    order = spiral_sort(ring)
    assert order[0] == ViewCoord(-1, 0)
    assert order[1] == ViewCoord(-1, 1)
    assert order[2] == ViewCoord(0, 1)


def test_subset_contents():
    c2 = partition_views(9, "C2")
    assert all((s + t) % 2 == 0 and 1 <= max(abs(s), abs(t)) <= 3 for s, t in c2.subsets[0])
    h2 = partition_views(9, "H2")
    assert all(s % 2 == 0 and t % 2 == 0 for s, t in h2.subsets[0])
    assert ViewCoord(0, 0) in partition_views(9, "H4").subsets[1]


@pytest.mark.parametrize("grid", [5, 7, 11])
@pytest.mark.parametrize("kind", ["C2", "H2"])
def test_other_grid_sizes(grid, kind):
    order = partition_views(grid, kind)
    assert sum(order.sizes) == grid * grid


def test_parse_and_errors():
    assert ScanKind.parse("h4") is ScanKind.H4
    assert ScanKind.parse(1) is ScanKind.C4
    with pytest.raises(ScanOrderError):
        ScanKind.parse("zz")
    with pytest.raises(ScanOrderError):
        generate_scan_order("C2", 8)
    with pytest.raises(ScanOrderError):
        generate_scan_order("C4", 3)


def test_orders_are_deterministic():
    a = generate_scan_order("C4", 9)
    b = generate_scan_order("C4", 9)
    assert a == b
    assert np.array_equal(np.array(a.all_coords()), np.array(b.all_coords()))
