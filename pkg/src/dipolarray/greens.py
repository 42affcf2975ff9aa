"""Free-space dyadic Green's function: real space, Weyl decomposition, regularized forms.

Unit conventions used across the package: lengths in units of the transition
wavelength, energies and rates in units of the single-atom linewidth, energies
quoted as detunings from the bare transition frequency, time in inverse
linewidths.  With these choices the wavenumber entering every formula is
k = 2*pi (per wavelength).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import dawsn as _dawsn
from scipy.special import erf as _erf
from scipy.special import erfc as _erfc
from scipy.special import erfi as _erfi

from .utils import LightConePoleError

TWO_PI = 2.0 * math.pi

# exp(x^2) overflows double precision just above x = 26.6
_ERFI_OVERFLOW = 26.6

# relative distance from the light circle below which the Weyl form is rejected
_POLE_RTOL = 1e-9


@dataclass(frozen=True)
class PhysicalParams:
    """Atomic and lattice constants.

    ``lambda_`` and ``gamma0`` carry the physical scales (any consistent
    units); all geometry is expressed in units of the wavelength and all
    energies in units of the linewidth, so the two scales never enter a
    numerical formula.  ``mu_b`` is the Zeeman shift in linewidth units and
    ``spacing`` the interatomic distance in wavelength units.
    """

    lambda_: float = 1.0
    gamma0: float = 1.0
    mu_b: float = 0.0
    spacing: float = 0.05

    def __post_init__(self):
        if not self.lambda_ > 0:
            raise ValueError("lambda_ must be positive")
        if not self.gamma0 > 0:
            raise ValueError("gamma0 must be positive")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")

    @property
    def k(self) -> float:
        """Transition wavenumber, k*lambda_ = 2*pi exactly."""
        return TWO_PI / self.lambda_


@dataclass(frozen=True)
class RegularizationParams:
    """Gaussian momentum cutoff scale and reciprocal-sum truncation threshold.

    ``a_ho`` is the regulator length (same units as the lattice constant,
    i.e. wavelengths); ``g_cutoff`` sets the relative magnitude at which the
    reciprocal sum is truncated.
    """

    a_ho: float
    g_cutoff: float = 1e-12

    def __post_init__(self):
        if not self.a_ho > 0:
            raise ValueError("a_ho must be positive")
        if self.a_ho > 0.25:
            raise ValueError("a_ho must be small compared to the wavelength")
        if not 0.0 < self.g_cutoff < 1.0:
            raise ValueError("g_cutoff must lie in (0, 1)")

    @classmethod
    def for_spacing(cls, spacing: float, ratio: float = 0.05,
                    g_cutoff: float = 1e-12) -> "RegularizationParams":
        """Default regulator a_ho = ratio * spacing (ratio = 1/20)."""
        return cls(a_ho=ratio * spacing, g_cutoff=g_cutoff)


def greens_free_space(r, k: float) -> np.ndarray:
    """Closed-form dyadic Green's function at separation ``r`` (3-vector).

    Returns the 3x3 complex tensor, units 1/length.  The contact (delta)
    term is excluded: the tensor is only meaningful for distinct emitters,
    and zero separation raises.
    """
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        r = r.reshape(3)
    dist = float(np.linalg.norm(r))
    if dist == 0.0:
        raise ValueError(
            "zero separation: the delta-function contact term is excluded; "
            "use greens_regularized_origin for the smeared on-site value")
    kr = k * dist
    n = r / dist
    phase = np.exp(1j * kr)
    c_diag = 1.0 + 1j / kr - 1.0 / kr**2
    c_nn = -1.0 - 3j / kr + 3.0 / kr**2
    out = c_diag * np.eye(3) + c_nn * np.outer(n, n)
    out *= -phase / (4.0 * math.pi * dist)
    return out


def greens_free_space_inplane(dx, dy, k: float) -> tuple:
    """Vectorized in-plane (xx, yy, xy) components for z = 0 separations.

    ``dx``/``dy`` are broadcastable arrays; entries with zero distance are
    the caller's responsibility (they produce inf/nan).
    """
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    dist = np.sqrt(dx * dx + dy * dy)
    kr = k * dist
    with np.errstate(divide="ignore", invalid="ignore"):
        pref = -np.exp(1j * kr) / (4.0 * math.pi * dist)
        c_diag = 1.0 + 1j / kr - 1.0 / kr**2
        c_nn = -1.0 - 3j / kr + 3.0 / kr**2
        nx = dx / dist
        ny = dy / dist
        gxx = pref * (c_diag + c_nn * nx * nx)
        gyy = pref * (c_diag + c_nn * ny * ny)
        gxy = pref * (c_nn * nx * ny)
    return gxx, gyy, gxy


def greens_regularized_origin(k: float, a_ho: float,
                              include_radiative: bool = True) -> np.ndarray:
    """Gaussian-smeared Green's function evaluated at the source.

    Diagonal 3x3 tensor; its imaginary part tends to -k/(6*pi) per axis as
    the regulator is removed.  ``include_radiative=False`` drops the
    imaginary (radiative) part, used for Hermitian-split diagnostics.
    """
    if not a_ho > 0:
        raise ValueError("a_ho must be positive")
    ka = k * a_ho
    bracket = (_erfi(ka / math.sqrt(2.0)) - 1j) * math.exp(-(ka**2) / 2.0)
    bracket -= (-0.5 + ka**2) / (math.sqrt(math.pi / 2.0) * ka**3)
    val = (k / (6.0 * math.pi)) * bracket
    if not include_radiative:
        val = val.real
    return val * np.eye(3, dtype=complex)


def weyl_lambda(q, k: float):
    """Out-of-plane wavenumber Lambda = sqrt(k^2 - |q|^2), branch Im >= 0, Re >= 0."""
    q = np.asarray(q, dtype=float)
    lam2 = k * k - float(q[0]) ** 2 - float(q[1]) ** 2
    if lam2 >= 0.0:
        return complex(math.sqrt(lam2), 0.0)
    return complex(0.0, math.sqrt(-lam2))


def weyl_chi(q, k: float, a_ho: float) -> complex:
    """Gaussian weight chi(q); algebraically equal to exp(-a_ho^2 k^2/2)/(2 pi k^2)."""
    q = np.asarray(q, dtype=float)
    lam = weyl_lambda(q, k)
    expo = -0.5 * a_ho**2 * (q[0] ** 2 + q[1] ** 2 + lam * lam)
    return np.exp(expo) / (2.0 * math.pi * k * k)


def weyl_g_star(q, k: float, a_ho: float,
                include_radiative: bool = True) -> np.ndarray:
    """Regularized in-plane Weyl decomposition of the Green's function at z = 0.

    Returns the 2x2 complex tensor with entries built from I(q), chi(q) and
    Lambda(q).  Purely real for evanescent |q| > k, complex for radiative
    |q| < k.  Exactly on the light circle Lambda vanishes and the 1/Lambda
    pole is physical; such points are rejected and callers must keep grid
    points off the circle.

    Because Lambda is purely real or purely imaginary for real q, only
    real-argument erf/erfi are ever needed (the evanescent branch reduces to
    erfc of a real argument, which is also the numerically stable form).
    """
    q = np.asarray(q, dtype=float).reshape(2)
    if not np.all(np.isfinite(q)):
        raise ValueError("q must be finite")
    qn = math.hypot(q[0], q[1])
    if abs(qn - k) <= _POLE_RTOL * k:
        raise LightConePoleError(
            f"|q| = {qn:.12g} sits on the light circle |q| = k = {k:.12g}; "
            "offset the grid point off the circle")
    gxx, gyy, gxy = _g_star_components(
        np.array([q[0]]), np.array([q[1]]), k, a_ho, include_radiative)
    return np.array([[gxx[0], gxy[0]], [gxy[0], gyy[0]]])


def _g_star_components(qx, qy, k, a_ho, include_radiative=True):
    """Vectorized g*_xx, g*_yy, g*_xy.  Caller guarantees no point on the circle."""
    q2 = qx * qx + qy * qy
    lam2 = k * k - q2
    radiative = lam2 > 0.0
    lam_abs = np.sqrt(np.abs(lam2))
    chi = math.exp(-0.5 * (a_ho * k) ** 2) / (2.0 * math.pi * k * k)
    x = (a_ho / math.sqrt(2.0)) * lam_abs
    ivals = np.empty(q2.shape, dtype=complex)
    # radiative region: Lambda real, I = chi*pi/Lambda * (-i + erfi(x))
    if np.any(radiative):
        lr = lam_abs[radiative]
        bracket = _erfi(x[radiative]) + 0j
        if include_radiative:
            bracket -= 1j
        ivals[radiative] = chi * math.pi / lr * bracket
    # evanescent region: Lambda = i|Lambda|, -i + erfi(i x) = -i*erfc(x),
    # so I = -chi*pi*erfc(x)/|Lambda| (real; erfc avoids cancellation)
    ev = ~radiative
    if np.any(ev):
        ivals[ev] = -chi * math.pi * _erfc(x[ev]) / lam_abs[ev]
    gxx = (k * k - qx * qx) * ivals
    gyy = (k * k - qy * qy) * ivals
    gxy = -(qx * qy) * ivals
    return gxx, gyy, gxy


def erf_pair(x: float) -> tuple[float, float]:
    """(erf(x), erfi(x)) for real x.

    The lattice machinery only ever needs real arguments: for real in-plane
    momenta Lambda is purely real or purely imaginary, and erfi(i*x) reduces
    to i*erf(x), so no complex error function is required.  Accurate to
    1e-12 relative for |x| <= 30 wherever the value is representable;
    erfi overflows double precision above ~26.6 and is guarded to +-inf
    (use erfi_scaled for a representable form there).
    """
    xf = float(x)
    if not math.isfinite(xf):
        raise ValueError("erf_pair requires finite real input")
    e = float(_erf(xf))
    if abs(xf) > _ERFI_OVERFLOW:
        ei = math.copysign(math.inf, xf)
    else:
        ei = float(_erfi(xf))
    return e, ei


def erfi_scaled(x: float) -> float:
    """exp(-x^2) * erfi(x), representable for all real x (equals 2*dawsn(x)/sqrt(pi))."""
    xf = float(x)
    if not math.isfinite(xf):
        raise ValueError("erfi_scaled requires finite real input")
    return 2.0 * float(_dawsn(xf)) / math.sqrt(math.pi)
