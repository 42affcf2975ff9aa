"""Geometry and finite-lattice builder tests."""

import math

import numpy as np
import pytest
from scipy.spatial import cKDTree

from dipolarray.lattice import (build_geometry, build_hexagon_bearded,
                                build_stripe, bz_path, carve_defect,
                                export_csv)

A = 0.05


def neighbor_lists(lat):
    tree = cKDTree(lat.positions)
    pairs = tree.query_pairs(r=1.001 * lat.spacing)
    adj = {i: set() for i in range(lat.n_atoms)}
    for i, j in pairs:
        adj[i].add(j)
        adj[j].add(i)
    return adj


class TestGeometry:
    def test_reciprocal_duality(self):
        g = build_geometry(A)
        assert abs(g.g1 @ g.a1 - 2 * math.pi) < 1e-12
        assert abs(g.g1 @ g.a2) < 1e-12
        assert abs(g.g2 @ g.a2 - 2 * math.pi) < 1e-12
        assert abs(g.g2 @ g.a1) < 1e-12

    def test_symmetry_point_magnitudes(self):
        g = build_geometry(A)
        assert np.linalg.norm(g.sym_points["K"]) == pytest.approx(
            4 * math.pi / (3 * math.sqrt(3) * A), rel=1e-14)
        assert np.linalg.norm(g.sym_points["Gamma"]) == 0.0

    def test_cell_area_and_basis(self):
        g = build_geometry(A)
        assert g.cell_area == pytest.approx(1.5 * math.sqrt(3) * A**2, rel=1e-14)
        assert np.linalg.norm(g.b) == pytest.approx(A, rel=1e-14)

    def test_invalid_spacing(self):
        with pytest.raises(ValueError):
            build_geometry(-0.1)


class TestBzPath:
    def test_degenerate_path(self):
        g = build_geometry(A)
        karr, arc = bz_path([g.sym_points["Gamma"], g.sym_points["Gamma"]], 5)
        assert karr.shape == (5, 2)
        assert np.all(karr == 0.0)
        assert np.all(arc == 0.0)

    def test_endpoint_bookkeeping(self):
        g = build_geometry(A)
        pts = [g.sym_points[n] for n in ("M", "Gamma", "K")]
        karr, arc = bz_path(pts, 100)
        assert karr.shape == (201, 2)
        assert np.allclose(karr[0], pts[0])
        assert np.allclose(karr[-1], pts[-1])

    def test_arc_length_of_gamma_k_segment(self):
        g = build_geometry(A)
        karr, arc = bz_path([g.sym_points["Gamma"], g.sym_points["K"]], 50)
        assert arc[-1] == pytest.approx(np.linalg.norm(g.sym_points["K"]),
                                        rel=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            bz_path([], 10)


class TestStripes:
    @pytest.mark.parametrize("edge,rows,cols,n", [
        ("bearded", 42, 40, 1680),
        ("armchair", 41, 40, 1640),
        ("zigzag", 41, 40, 1640),
    ])
    def test_atom_counts(self, edge, rows, cols, n):
        lat = build_stripe(edge, rows, cols, images=2, a=A)
        assert lat.n_atoms == n == rows * cols

    def test_unknown_edge_rejected(self):
        with pytest.raises(ValueError, match="edge"):
            build_stripe("chirale", 10, 10, 2)

    @pytest.mark.parametrize("edge", ["bearded", "armchair", "zigzag"])
    def test_periodic_translation_maps_to_itself(self, edge):
        lat = build_stripe(edge, 8, 8, images=2, a=A)
        period = lat.periodic_axis.period
        shifted = lat.positions + np.array([period, 0.0])
        shifted[:, 0] %= period
        base = lat.positions.copy()
        base[:, 0] %= period
        order = np.lexsort((base[:, 0], base[:, 1]))
        order_s = np.lexsort((shifted[:, 0], shifted[:, 1]))
        assert np.allclose(base[order], shifted[order_s], atol=1e-9)

    def test_minimum_distance_is_spacing(self):
        for edge in ("bearded", "armchair", "zigzag"):
            lat = build_stripe(edge, 10, 8, images=0, a=A)
            tree = cKDTree(lat.positions)
            d, _ = tree.query(lat.positions, k=2)
            assert d[:, 1].min() == pytest.approx(A, rel=1e-9)

    def test_sublattice_offset_within_cells(self):
        lat = build_stripe("bearded", 10, 8, images=0, a=A)
        pos1 = {tuple(np.round(p, 9)) for p in
                lat.positions[lat.sublattice == 1]}
        inside = 0
        for p in lat.positions[lat.sublattice == 2]:
            if tuple(np.round(p - np.array([0.0, A]), 9)) in pos1:
                inside += 1
        # every complete vertical pair realizes site2 = site1 + b
        assert inside == (10 // 2) * 8

    def test_bearded_terminations(self):
        lat = build_stripe("bearded", 12, 8, images=0, a=A)
        adj = neighbor_lists(lat)
        for r, want in ((0, 1), (11, 1)):
            sel = np.flatnonzero(lat.row_index == r)
            assert all(len(adj[i]) == want for i in sel)

    def test_zigzag_bottom_termination(self):
        # periodic wrap counts: every bottom-row atom keeps two up-neighbors
        lat = build_stripe("zigzag", 12, 8, images=0, a=A)
        deg = lat.neighbor_counts()
        bottom = np.flatnonzero(lat.row_index == 0)
        assert all(deg[i] == 2 for i in bottom)


class TestHexagon:
    def test_smallest_hexagon_golden_count(self):
        # exhaustive construction at rings=1: one hexagonal plaquette of six
        # atoms plus one dangling whisker per perimeter site
        lat = build_hexagon_bearded(1, a=A)
        assert lat.n_atoms == 12

    def test_count_increases_with_rings(self):
        counts = [build_hexagon_bearded(m, a=A).n_atoms for m in range(1, 6)]
        assert counts == sorted(counts)
        assert all(b > a for a, b in zip(counts, counts[1:]))
        assert counts == [6 * m * (m + 1) for m in range(1, 6)]

    def test_outermost_sites_are_dangling(self):
        lat = build_hexagon_bearded(4, a=A)
        deg = lat.neighbor_counts()
        for theta in np.linspace(0, 2 * math.pi, 72, endpoint=False):
            direction = np.array([math.cos(theta), math.sin(theta)])
            proj = lat.positions @ direction
            assert deg[int(np.argmax(proj))] == 1

    def test_minimum_distance(self):
        lat = build_hexagon_bearded(3, a=A)
        tree = cKDTree(lat.positions)
        d, _ = tree.query(lat.positions, k=2)
        assert d[:, 1].min() == pytest.approx(A, rel=1e-9)

    def test_invalid_rings(self):
        with pytest.raises(ValueError):
            build_hexagon_bearded(0)


def flood_fill_connected(lat):
    adj = neighbor_lists(lat)
    seen = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for i in frontier:
            for j in adj[i]:
                if j not in seen:
                    seen.add(j)
                    nxt.append(j)
        frontier = nxt
    return len(seen) == lat.n_atoms


class TestDefects:
    def test_empty_region_is_identity(self):
        lat = build_hexagon_bearded(3, a=A)
        assert carve_defect(lat, lambda p: False) is lat

    def test_single_atom_removal(self):
        lat = build_hexagon_bearded(3, a=A)
        target = lat.positions[17]
        carved = carve_defect(lat, lambda p: np.allclose(p, target))
        assert carved.n_atoms == lat.n_atoms - 1
        assert carved.defect_mask.shape == (1, 2)

    def test_edge_disk_leaves_connected_remainder(self):
        lat = build_hexagon_bearded(6, a=A)
        edge_atom = lat.positions[np.argmax(lat.positions[:, 0])]
        carved = carve_defect(
            lat, lambda p: np.linalg.norm(p - edge_atom) < 3 * A)
        assert carved.n_atoms < lat.n_atoms
        assert flood_fill_connected(carved)

    def test_removing_everything_rejected(self):
        lat = build_hexagon_bearded(2, a=A)
        with pytest.raises(ValueError):
            carve_defect(lat, lambda p: True)


def test_csv_export(tmp_path):
    lat = build_hexagon_bearded(2, a=A)
    path = tmp_path / "lat.csv"
    export_csv(lat, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "index,x,y,sublattice,is_boundary"
    assert len(lines) == lat.n_atoms + 1
