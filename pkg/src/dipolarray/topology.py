"""Chern numbers on the BZ torus and gap scans against field and spacing.

Chern numbers use discretized link variables: overlaps of right eigenvectors
between neighboring grid points, with determinant links for grouped bands so
degeneracies inside a group are harmless.  Plaquette fluxes are the wrapped
phases of the four-link products; their sum is 2*pi times an integer on the
torus by construction, and that integer is the reported Chern number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bloch
from .greens import PhysicalParams, RegularizationParams, greens_free_space
from .lattice import LatticeGeometry, build_geometry
from .utils import ConvergenceError

_LINK_TOL = 1e-8


@dataclass(frozen=True)
class ChernReport:
    grid_n: int
    chern: list                 # per-band integers, None where bands touch
    sum_below: int              # bands 1-2 (grouped determinant links)
    sum_above: int              # bands 3-4
    delta: float                # indirect gap on the same grid
    flux_below: np.ndarray      # (grid_n, grid_n) plaquette phases
    flux_above: np.ndarray
    residual: float             # worst |flux sum / 2pi - integer|

    def as_dict(self) -> dict:
        return {
            "grid_n": self.grid_n,
            "chern": self.chern,
            "sum_below": self.sum_below,
            "sum_above": self.sum_above,
            "delta": self.delta,
            "residual": self.residual,
        }


def _links(vectors: np.ndarray, bands, axis: int) -> np.ndarray:
    """Determinant overlap links along one grid axis for the given band set."""
    v = vectors[..., bands]
    vs = np.roll(v, -1, axis=axis)
    ov = np.einsum("ijab,ijac->ijbc", v.conj(), vs)
    if len(bands) == 1:
        u = ov[..., 0, 0]
    else:
        u = np.linalg.det(ov)
    if np.min(np.abs(u)) < _LINK_TOL:
        raise ConvergenceError(
            "near-zero overlap link; refine the Chern grid")
    return u


def fluxes_from_vectors(vectors: np.ndarray, bands) -> np.ndarray:
    """Gauge-invariant plaquette fluxes for a band group on a periodic grid.

    ``vectors`` has shape (n, n, 4, 4) with eigenvectors in columns; the grid
    is understood as periodic (k and k + g_i host identical matrices).
    """
    u1 = _links(vectors, bands, axis=0)
    u2 = _links(vectors, bands, axis=1)
    prod = u1 * np.roll(u2, -1, axis=0) * np.roll(u1, -1, axis=1).conj() \
        * u2.conj()
    return np.angle(prod)


def chern_numbers(params: PhysicalParams, reg: RegularizationParams,
                  grid_n: int = 24,
                  geom: LatticeGeometry | None = None) -> ChernReport:
    """Chern numbers of the four Bloch bands at the given field.

    Requires an open gap between bands 2 and 3 so the grouping is defined;
    refuses otherwise.
    """
    if grid_n < 12:
        raise ValueError("grid_n must be >= 12")
    if geom is None:
        geom = build_geometry(params.spacing)
    kpts = bloch.bz_grid(geom, grid_n)
    mats = bloch.interaction_matrices_batch(kpts, params, reg, geom) \
        + bloch.zeeman_block(params.mu_b)
    w, v = bloch.eig_sorted(mats)
    gap = bloch.band_gap_from_energies(kpts, w, grid_n)
    if gap.closed:
        raise ValueError("gap closed: band grouping above/below is undefined")
    vgrid = v.reshape(grid_n, grid_n, 4, 4)
    wgrid = w.reshape(grid_n, grid_n, 4)

    flux_below = fluxes_from_vectors(vgrid, [0, 1])
    flux_above = fluxes_from_vectors(vgrid, [2, 3])
    c_below = flux_below.sum() / (2 * math.pi)
    c_above = flux_above.sum() / (2 * math.pi)
    residual = max(abs(c_below - round(c_below)), abs(c_above - round(c_above)))

    # individual bands only where neighbors stay separated on the grid
    sep = np.min(np.diff(np.sort(wgrid.real, axis=-1), axis=-1),
                 axis=(0, 1))
    chern = []
    for b in range(4):
        isolated = (b == 0 or sep[b - 1] > 1e-6) and \
            (b == 3 or sep[b] > 1e-6)
        if not isolated:
            chern.append(None)
            continue
        c = fluxes_from_vectors(vgrid, [b]).sum() / (2 * math.pi)
        residual = max(residual, abs(c - round(c)))
        chern.append(int(round(c)))
    if residual >= 1e-3:
        raise ConvergenceError(
            f"Chern flux sum off integer by {residual:.2e}; refine the grid")
    return ChernReport(grid_n=grid_n, chern=chern,
                       sum_below=int(round(c_below)),
                       sum_above=int(round(c_above)),
                       delta=gap.delta, flux_below=flux_below,
                       flux_above=flux_above, residual=residual)


@dataclass(frozen=True)
class GapCurve:
    fields: np.ndarray
    deltas: np.ndarray
    delta_max: float
    field_at_max: float


def gap_vs_field(params: PhysicalParams, reg: RegularizationParams,
                 fields, grid_n: int = 24,
                 geom: LatticeGeometry | None = None) -> GapCurve:
    """Gap curve over a magnetic-field grid, reusing the field-independent sums."""
    fields = np.asarray(fields, dtype=float)
    if fields.size == 0:
        raise ValueError("field grid must be nonempty")
    if geom is None:
        geom = build_geometry(params.spacing)
    kpts = bloch.bz_grid(geom, grid_n)
    base = bloch.interaction_matrices_batch(kpts, params, reg, geom)
    deltas = np.empty_like(fields)
    for i, mu in enumerate(fields):
        w, _ = bloch.eig_sorted(base + bloch.zeeman_block(mu))
        deltas[i] = bloch.band_gap_from_energies(kpts, w, grid_n).delta
    imax = int(np.argmax(deltas))
    return GapCurve(fields=fields, deltas=deltas,
                    delta_max=float(deltas[imax]),
                    field_at_max=float(fields[imax]))


def find_delta_max(params: PhysicalParams, reg: RegularizationParams,
                   grid_n: int = 24, field_max: float | None = None,
                   n_coarse: int = 49,
                   geom: LatticeGeometry | None = None) -> GapCurve:
    """Saturated maximum gap over field, with the scan range scaled to the spacing.

    The saturation field grows with the dipolar coupling, roughly as the
    inverse cube of the spacing, so the default range follows that scaling.
    """
    if field_max is None:
        field_max = 40.0 * (0.05 / params.spacing) ** 3
    fields = np.linspace(0.0, field_max, n_coarse)
    return gap_vs_field(params, reg, fields, grid_n, geom)


def dipolar_coupling(a: float) -> float:
    """|J| between two parallel x dipoles separated by a*x_hat (linewidth units)."""
    k = 2.0 * math.pi
    return abs(3.0 * math.pi / k * greens_free_space((a, 0.0, 0.0), k)[0, 0])


@dataclass(frozen=True)
class SpacingScaling:
    spacings: np.ndarray
    delta_max: np.ndarray
    coupling: np.ndarray
    slope_delta: float
    slope_coupling: float


def gap_scaling_vs_spacing(spacings, grid_n: int = 24,
                           reg_ratio: float = 0.05) -> SpacingScaling:
    """Delta_max(a) and J(a) with their log-log slopes."""
    spacings = np.asarray(spacings, dtype=float)
    if np.any(spacings > 0.1):
        raise ValueError("spacing scan expects deeply subwavelength a <= 0.1")
    dmax = np.empty_like(spacings)
    coup = np.empty_like(spacings)
    for i, a in enumerate(spacings):
        params = PhysicalParams(spacing=float(a))
        reg = RegularizationParams.for_spacing(float(a), ratio=reg_ratio)
        dmax[i] = find_delta_max(params, reg, grid_n).delta_max
        coup[i] = dipolar_coupling(float(a))
    slope_d = float(np.polyfit(np.log(spacings), np.log(dmax), 1)[0])
    slope_j = float(np.polyfit(np.log(spacings), np.log(coup), 1)[0])
    return SpacingScaling(spacings=spacings, delta_max=dmax, coupling=coup,
                          slope_delta=slope_d, slope_coupling=slope_j)
