"""Honeycomb geometry: Bravais/reciprocal vectors, BZ paths, finite lattice builders.

All positions are in wavelength units.  The orientation is fixed with the
nearest-neighbor bond along +y: Bravais vectors a1 = (sqrt(3) a, 0) and
a2 = (sqrt(3) a / 2, 3 a / 2), basis offset b = (0, a).  Horizontal atom rows
then alternate between the two sublattices, which makes the three stripe
terminations simple row selections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .utils import write_csv

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class LatticeGeometry:
    """Bravais, basis and reciprocal data for the infinite honeycomb."""

    spacing: float
    a1: np.ndarray
    a2: np.ndarray
    b: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    cell_area: float
    sym_points: dict

    def k_from_fractional(self, f1, f2):
        return np.multiply.outer(np.asarray(f1), self.g1) + \
            np.multiply.outer(np.asarray(f2), self.g2)


def build_geometry(a: float) -> LatticeGeometry:
    """Honeycomb geometry with interatomic spacing ``a`` (wavelength units)."""
    if not a > 0:
        raise ValueError("spacing must be positive")
    a1 = np.array([SQRT3 * a, 0.0])
    a2 = np.array([SQRT3 * a / 2.0, 1.5 * a])
    bvec = np.array([0.0, a])
    amat = np.stack([a1, a2])          # rows
    gmat = 2.0 * math.pi * np.linalg.inv(amat).T
    g1, g2 = gmat[0], gmat[1]
    cell_area = abs(a1[0] * a2[1] - a1[1] * a2[0])
    sym = {
        "Gamma": np.zeros(2),
        "K": (2.0 * g1 + g2) / 3.0,
        "M": (g1 + g2) / 2.0,
    }
    return LatticeGeometry(spacing=a, a1=a1, a2=a2, b=bvec, g1=g1, g2=g2,
                           cell_area=cell_area, sym_points=sym)


def bz_path(points, n_per_segment: int):
    """Piecewise-linear k path through the given points.

    Each segment contributes ``n_per_segment`` points (start included, end
    excluded); the final endpoint is appended unless it coincides with the
    last emitted point, so a degenerate single-point path of length n stays
    length n.  Returns (k array (N,2), cumulative arc length (N,)).
    """
    pts = [np.asarray(p, dtype=float).reshape(2) for p in points]
    if len(pts) == 0:
        raise ValueError("bz_path requires at least one point")
    if n_per_segment < 2:
        raise ValueError("n_per_segment must be >= 2")
    if len(pts) == 1:
        karr = np.repeat(pts[0][None, :], n_per_segment, axis=0)
        return karr, np.zeros(n_per_segment)
    out = []
    for start, end in zip(pts[:-1], pts[1:]):
        frac = np.arange(n_per_segment) / n_per_segment
        out.append(start[None, :] + frac[:, None] * (end - start)[None, :])
    karr = np.concatenate(out, axis=0)
    if np.linalg.norm(pts[-1] - karr[-1]) > 0:
        karr = np.concatenate([karr, pts[-1][None, :]], axis=0)
    seglen = np.linalg.norm(np.diff(karr, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seglen)])
    return karr, arc


@dataclass(frozen=True)
class PeriodicAxis:
    """Periodic direction of a stripe: x axis with ``n_cells`` cells of width ``cell_width``."""

    cell_width: float
    n_cells: int
    image_count: int

    @property
    def period(self) -> float:
        return self.cell_width * self.n_cells


@dataclass(frozen=True)
class FiniteLattice:
    """Explicit atom positions with sublattice labels and optional periodicity.

    ``row_index``/``col_index`` record the construction grid (transverse atom
    row and periodic cell column) where applicable; ``defect_mask`` keeps the
    positions of carved-out atoms for provenance.
    """

    positions: np.ndarray            # (N, 2), wavelength units
    sublattice: np.ndarray           # (N,), 1 or 2
    boundary_type: str
    spacing: float
    row_index: np.ndarray | None = None
    col_index: np.ndarray | None = None
    periodic_axis: PeriodicAxis | None = None
    defect_mask: np.ndarray | None = None   # (M, 2) removed positions

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]

    def neighbor_counts(self) -> np.ndarray:
        """Number of nearest neighbors per atom (periodic wrap included)."""
        return _neighbor_counts(self)

    def boundary_flags(self) -> np.ndarray:
        """Perimeter atoms: coordination < 3, plus the supports of dangling atoms."""
        deg = self.neighbor_counts()
        flags = deg < 3
        if np.any(deg == 1):
            tree = cKDTree(self.positions)
            pairs = tree.query_ball_point(self.positions[deg == 1],
                                          r=1.001 * self.spacing)
            for lst in pairs:
                flags[lst] = True
        return flags


def _neighbor_counts(lat: FiniteLattice) -> np.ndarray:
    pos = lat.positions
    tree = cKDTree(pos)
    pairs = tree.query_pairs(r=1.001 * lat.spacing, output_type="ndarray")
    deg = np.zeros(lat.n_atoms, dtype=int)
    if pairs.size:
        np.add.at(deg, pairs[:, 0], 1)
        np.add.at(deg, pairs[:, 1], 1)
    if lat.periodic_axis is not None:
        # bonds across the periodic seam
        period = lat.periodic_axis.period
        shifted = pos.copy()
        shifted[:, 0] += period
        tree2 = cKDTree(shifted)
        cross = tree.query_ball_tree(tree2, r=1.001 * lat.spacing)
        for i, lst in enumerate(cross):
            for j in lst:
                if i != j:
                    deg[i] += 1
                    deg[j] += 1
    return deg


def _row_sites(abs_row: int, a: float):
    """(y, x offset, sublattice) of horizontal atom row ``abs_row`` of the infinite lattice."""
    j, parity = divmod(abs_row, 2)
    delta = (j % 2) * (SQRT3 * a / 2.0)
    if parity == 0:
        return 1.5 * a * j, delta, 1          # sublattice 1 (vertical bond up)
    return 1.5 * a * j + a, delta, 2          # sublattice 2 (vertical bond down)


def build_stripe(edge_type: str, rows: int, cols: int, images: int,
                 a: float = 0.05) -> FiniteLattice:
    """Stripe periodic along x with the requested open-edge termination.

    ``cols`` atoms per horizontal row along the periodic direction, ``rows``
    atom rows across the stripe, so the atom count is rows*cols.  For bearded
    and zigzag stripes the cell width is sqrt(3) a with one atom per row per
    cell; armchair rows hold two atoms per 3a cell (cols must be even).  An
    even row count terminates both open edges with the requested edge; an odd
    count necessarily mixes terminations (the opposing edge comes out bearded
    for zigzag stripes and zigzag for bearded ones).
    """
    if rows < 4 or cols < 4:
        raise ValueError("rows and cols must both be >= 4")
    if images < 0:
        raise ValueError("images must be >= 0")
    if edge_type in ("bearded", "zigzag"):
        start = 0 if edge_type == "bearded" else 1
        xs, ys, sub, rown, coln = [], [], [], [], []
        for r in range(rows):
            y, delta, s = _row_sites(start + r, a)
            for c in range(cols):
                xs.append(SQRT3 * a * c + delta)
                ys.append(y)
                sub.append(s)
                rown.append(r)
                coln.append(c)
        axis = PeriodicAxis(cell_width=SQRT3 * a, n_cells=cols,
                            image_count=images)
    elif edge_type == "armchair":
        if cols % 2:
            raise ValueError("armchair stripes need an even atom count per row")
        xs, ys, sub, rown, coln = [], [], [], [], []
        for r in range(rows):
            y = r * SQRT3 * a / 2.0
            shift = 1.5 * a * (r % 2)
            for c in range(cols // 2):
                for s, dx in ((1, 0.0), (2, a)):
                    xs.append(3.0 * a * c + shift + dx)
                    ys.append(y)
                    sub.append(s)
                    rown.append(r)
                    coln.append(c)
        axis = PeriodicAxis(cell_width=3.0 * a, n_cells=cols // 2,
                            image_count=images)
    else:
        raise ValueError(f"unknown edge type {edge_type!r}; "
                         "expected bearded, armchair or zigzag")
    return FiniteLattice(
        positions=np.column_stack([xs, ys]),
        sublattice=np.asarray(sub), boundary_type=edge_type, spacing=a,
        row_index=np.asarray(rown), col_index=np.asarray(coln),
        periodic_axis=axis)


def build_hexagon_bearded(rings: int, a: float = 0.05) -> FiniteLattice:
    """Hexagonal patch whose six sides all terminate in bearded edges.

    Construction: the hexagon-of-hexagons flake with ``rings`` plaquettes per
    side (6*rings^2 atoms), plus a dangling atom attached to every perimeter
    site, giving N = 6*rings*(rings+1).
    """
    if rings < 1:
        raise ValueError("rings must be >= 1")
    geom = build_geometry(a)
    m = rings - 1
    core = set()
    for i in range(-m, m + 1):
        for j in range(-m, m + 1):
            if max(abs(i), abs(j), abs(i + j)) <= m:
                # six corner sites of plaquette (i, j): (sublattice, i, j)
                core.update({(1, i, j), (2, i, j), (1, i, j + 1),
                             (2, i + 1, j), (1, i + 1, j), (2, i + 1, j - 1)})
    whiskers = set()
    for site in core:
        for nb in _site_neighbors(site):
            if nb not in core:
                whiskers.add(nb)
    sites = sorted(core) + sorted(whiskers)
    pos = np.array([_site_position(s, geom) for s in sites])
    sub = np.array([s[0] for s in sites])
    centroid = pos.mean(axis=0)
    pos = pos - centroid
    order = np.lexsort((pos[:, 0], pos[:, 1]))
    return FiniteLattice(positions=pos[order], sublattice=sub[order],
                         boundary_type="hexagon-bearded", spacing=a)


def _site_neighbors(site):
    s, i, j = site
    if s == 1:
        return ((2, i, j), (2, i, j - 1), (2, i + 1, j - 1))
    return ((1, i, j), (1, i, j + 1), (1, i - 1, j + 1))


def _site_position(site, geom: LatticeGeometry):
    s, i, j = site
    p = i * geom.a1 + j * geom.a2
    if s == 2:
        p = p + geom.b
    return p


def carve_defect(lat: FiniteLattice, region) -> FiniteLattice:
    """Remove every atom for which ``region(position)`` is true.

    Indices are re-packed; removed positions are appended to the defect mask.
    """
    inside = np.array([bool(region(p)) for p in lat.positions])
    if inside.all():
        raise ValueError("defect region removes all atoms")
    if not inside.any():
        return lat
    removed = lat.positions[inside]
    if lat.defect_mask is not None:
        removed = np.vstack([lat.defect_mask, removed])
    keep = ~inside
    return replace(
        lat,
        positions=lat.positions[keep],
        sublattice=lat.sublattice[keep],
        row_index=None if lat.row_index is None else lat.row_index[keep],
        col_index=None if lat.col_index is None else lat.col_index[keep],
        defect_mask=removed)


def export_csv(lat: FiniteLattice, path) -> None:
    """Columns: index, x, y (wavelength units), sublattice, is_boundary."""
    flags = lat.boundary_flags()
    rows = [(i, lat.positions[i, 0], lat.positions[i, 1],
             int(lat.sublattice[i]), bool(flags[i]))
            for i in range(lat.n_atoms)]
    write_csv(path, ["index", "x", "y", "sublattice", "is_boundary"], rows)
