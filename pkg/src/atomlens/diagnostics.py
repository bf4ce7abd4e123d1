"""Beam observables: widths, momentum widths, M^2, Gaussian fits, densities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy.optimize import least_squares

from .grid import ComplexField, _moments, centroid_and_rms
from .params import HBAR, SpeciesParams

FWHM_PER_SIGMA = 2 * math.sqrt(2 * math.log(2))

# divergence-fit zones along z (m)
ZONES = {"kirchhoff": (0.0, 140e-6), "paraxial": (-140e-6, 0.0)}


class FitError(RuntimeError):
    pass


@dataclass
class BeamSlice:
    z: float
    x: np.ndarray
    line_density: np.ndarray  # |psi|^2 integrated over the eliminated axes

    def atoms(self) -> float:
        return float(self.line_density.sum() * (self.x[1] - self.x[0]))


@dataclass
class GaussianFit:
    amplitude: float
    center: float
    sigma: float
    residual_rms: float
    direct_fwhm: float = float("nan")
    iterations: int = 0

    @property
    def fwhm(self) -> float:
        return FWHM_PER_SIGMA * self.sigma


def _xz_density(field: ComplexField) -> np.ndarray:
    """Density on (x, z), integrated over y for 3D grids."""
    n = field.density()
    if field.grid.dims == 3:
        n = n.sum(axis=1) * field.grid.spacing[1]
    return n


def _window_rows(field: ComplexField, z_window) -> np.ndarray:
    z = field.grid.coord("z")
    if z_window is None:
        return np.ones(z.size, dtype=bool)
    lo, hi = min(z_window), max(z_window)
    return (z >= lo) & (z <= hi)


def centroid_and_rms_safe(field: ComplexField, axis: str):
    return centroid_and_rms(field, axis)


def beam_width(field: ComplexField, z_window=None) -> float:
    """rms width of |psi|^2 along x, restricted to a z window."""
    rows = _window_rows(field, z_window)
    marginal = _xz_density(field)[:, rows].sum(axis=1)
    if not marginal.sum() > 0:
        raise ValueError("beam is empty in the requested window")
    return _moments(field.grid.coord("x"), marginal)[1]


def _kx_marginal(field: ComplexField, rows) -> np.ndarray:
    amp = field.amplitude
    spec = sfft.fft(amp, axis=0)
    p = spec.real**2 + spec.imag**2
    if field.grid.dims == 3:
        p = p.sum(axis=1)
    return p[:, rows].sum(axis=1)


def beam_momentum_width(field: ComplexField, species: SpeciesParams | None = None, z_window=None) -> float:
    """(hbar/m) * rms(k_x) of the transverse momentum marginal in a z window."""
    species = species or SpeciesParams()
    rows = _window_rows(field, z_window)
    marginal = _kx_marginal(field, rows)
    if not marginal.sum() > 0:
        raise ValueError("beam is empty in the requested window")
    kx = field.grid.wavenumber("x")
    return species.hbar / species.mass * _moments(kx, marginal)[1]


def quality_factor(dx: float, dvx: float, mass: float, hbar: float = HBAR) -> float:
    """M^2 = (2/hbar) dx m dvx."""
    if not (dx > 0 and dvx > 0):
        raise ValueError("widths must be positive")
    return 2.0 / hbar * dx * mass * dvx


def width_profile(field: ComplexField, species: SpeciesParams | None = None, min_fraction: float = 1e-3):
    """Per-z-row beam width, velocity width and M^2.

    Rows whose line density is below ``min_fraction`` of the maximum are NaN.
    Returns a dict of equal-length arrays keyed z_m, line_density, dx_m,
    dvx_m_s, m2.
    """
    species = species or SpeciesParams()
    g = field.grid
    x = g.coord("x")
    kx = g.wavenumber("x")
    n = _xz_density(field)
    spec = sfft.fft(field.amplitude, axis=0)
    p = spec.real**2 + spec.imag**2
    if g.dims == 3:
        p = p.sum(axis=1)
    line = n.sum(axis=0) * g.spacing[0]
    ok = line > min_fraction * line.max() if line.max() > 0 else np.zeros_like(line, dtype=bool)
    dx = np.full(line.shape, np.nan)
    dv = np.full(line.shape, np.nan)
    for j in np.flatnonzero(ok):
        dx[j] = _moments(x, n[:, j])[1]
        dv[j] = species.hbar / species.mass * _moments(kx, p[:, j])[1]
    m2 = 2.0 / species.hbar * dx * species.mass * dv
    return {"z_m": g.coord("z"), "line_density": line, "dx_m": dx, "dvx_m_s": dv, "m2": m2}


def beam_slice(field: ComplexField, z: float) -> BeamSlice:
    """x-profile of the density on the grid row nearest ``z``."""
    zs = field.grid.coord("z")
    if not (zs[0] <= z <= zs[-1]):
        raise ValueError(f"z={z!r} is outside the grid")
    j = int(np.argmin(np.abs(zs - z)))
    return BeamSlice(float(zs[j]), field.grid.coord("x"), _xz_density(field)[:, j].copy())


def _direct_fwhm(x, y):
    i = int(np.argmax(y))
    half = 0.5 * y[i]
    above = y >= half
    lo = i
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = i
    while hi < y.size - 1 and above[hi + 1]:
        hi += 1

    def cross(a, b):
        # linear interpolation of the half-max crossing between samples a and b
        return x[a] + (half - y[a]) * (x[b] - x[a]) / (y[b] - y[a])

    left = cross(lo - 1, lo) if lo > 0 else x[lo]
    right = cross(hi, hi + 1) if hi < y.size - 1 else x[hi]
    return right - left, hi - lo + 1


def fit_gaussian(sl: BeamSlice, window: float = 1.5, min_points: int = 8, xtol: float = 1e-6) -> GaussianFit:
    """Least-squares Gaussian fit (Levenberg-Marquardt) to a beam slice.

    Initialized from the moments of the central lobe; the fit uses the samples
    within ``window`` direct-FWHMs of the peak.
    """
    x = np.asarray(sl.x, dtype=float)
    y = np.asarray(sl.line_density, dtype=float)
    if y.max() <= 0 or np.ptp(y) <= 1e-12 * abs(y.max()):
        raise FitError("degenerate (flat) slice")
    direct, n_above = _direct_fwhm(x, y)
    if n_above < min_points:
        raise FitError(f"only {n_above} samples above half maximum (need {min_points}); refine the grid")
    i = int(np.argmax(y))
    sel = np.abs(x - x[i]) <= window * direct
    xs, ys = x[sel], y[sel]
    mean, rms = _moments(xs, ys)
    scale = ys.max()

    def resid(p):
        a, c, s = p
        return (a * np.exp(-0.5 * ((xs - c) / s) ** 2) - ys) / scale

    p0 = np.array([scale, mean, max(rms, direct / FWHM_PER_SIGMA)])
    res = least_squares(resid, p0, method="lm", xtol=xtol, x_scale=np.abs(p0) + [0, direct, 0])
    if res.status <= 0:
        raise FitError(f"Gaussian fit did not converge: {res.message}")
    a, c, s = res.x
    return GaussianFit(float(a), float(c), float(abs(s)), float(np.sqrt(np.mean(res.fun**2))),
                       float(direct), int(res.nfev))


def peak_density(field: ComplexField, focal_z: float) -> float:
    """Peak column density at the focal row, atoms per um^2."""
    if field.amplitude.size == 0:
        return 0.0
    return float(beam_slice(field, focal_z).line_density.max()) * 1e-12


def beam_atoms(field: ComplexField, z_range) -> float:
    rows = _window_rows(field, z_range)
    return float(_xz_density(field)[:, rows].sum() * field.grid.spacing[0] * field.grid.spacing[-1])


def divergence_fit(z, width, zone="paraxial", min_points: int = 5) -> float:
    """Beam divergence angle from a straight-line fit of width vs travelled distance.

    The beam falls toward -z, so the slope is taken against s = -z and a
    diverging beam gives a positive angle. ``zone`` is a name from ZONES or an
    explicit (z_lo, z_hi) pair; named zones include their lower edge only for
    the Kirchhoff zone, matching 0 <= z <= 140 um and -140 <= z < 0 um.
    """
    z = np.asarray(z, dtype=float)
    w = np.asarray(width, dtype=float)
    if isinstance(zone, str):
        lo, hi = ZONES[zone]
        sel = (z >= lo) & (z <= hi) if zone == "kirchhoff" else (z >= lo) & (z < hi)
    else:
        lo, hi = zone
        sel = (z >= lo) & (z <= hi)
    sel &= np.isfinite(w)
    if sel.sum() < min_points:
        raise ValueError(f"divergence fit needs >= {min_points} points in zone, got {int(sel.sum())}")
    slope = np.polyfit(-z[sel], w[sel], 1)[0]
    return float(math.atan(slope))
