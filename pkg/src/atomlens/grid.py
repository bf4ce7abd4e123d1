"""Uniform Cartesian grids, complex fields and spectral transforms.

Fields are stored with axes ordered (x, z) in 2D and (x, y, z) in 3D.
Spectral fields use the continuous-transform normalization

    phi(k) = dV / (2 pi)^(d/2) * sum_r psi(r) exp(-i k.r)

so that the sum of |phi|^2 dK over the wavenumber lattice equals the sum of
|psi|^2 dV over the position lattice.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft

AXIS_NAMES = {2: ("x", "z"), 3: ("x", "y", "z")}

SNAPSHOT_MAGIC = b"ALFS"
SNAPSHOT_VERSION = 1


class SnapshotError(ValueError):
    """Malformed or incompatible snapshot file."""


@dataclass(frozen=True)
class SimGrid:
    points: tuple[int, ...]
    extent: tuple[float, ...]
    center: tuple[float, ...] | None = None

    def __post_init__(self):
        points = tuple(int(p) for p in self.points)
        extent = tuple(float(e) for e in self.extent)
        if len(points) not in (2, 3) or len(extent) != len(points):
            raise ValueError("grid must have 2 or 3 axes with one extent per axis")
        for p in points:
            if p < 2 or p & (p - 1):
                raise ValueError(f"points per axis must be powers of two, got {p}")
        if any(not e > 0 for e in extent):
            raise ValueError("extents must be positive")
        center = (0.0,) * len(points) if self.center is None else tuple(float(c) for c in self.center)
        if len(center) != len(points):
            raise ValueError("one center per axis required")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "center", center)

    @property
    def dims(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def axis_names(self) -> tuple[str, ...]:
        return AXIS_NAMES[self.dims]

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / p for e, p in zip(self.extent, self.points))

    @property
    def dV(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def dK(self) -> float:
        return float(np.prod([2 * math.pi / e for e in self.extent]))

    def axis_index(self, name: str) -> int:
        return self.axis_names.index(name)

    def coord(self, axis: int | str) -> np.ndarray:
        """1D coordinate array; cell i sits at center - extent/2 + i*spacing."""
        i = self.axis_index(axis) if isinstance(axis, str) else axis
        n, L, c = self.points[i], self.extent[i], self.center[i]
        return c - L / 2 + np.arange(n) * (L / n)

    def wavenumber(self, axis: int | str) -> np.ndarray:
        """1D wavenumber array in standard FFT ordering (rad/m)."""
        i = self.axis_index(axis) if isinstance(axis, str) else axis
        return 2 * math.pi * sfft.fftfreq(self.points[i], self.spacing[i])

    def mesh(self, sparse: bool = True) -> list[np.ndarray]:
        return np.meshgrid(*[self.coord(i) for i in range(self.dims)], indexing="ij", sparse=sparse)

    def kmesh(self, sparse: bool = True) -> list[np.ndarray]:
        return np.meshgrid(*[self.wavenumber(i) for i in range(self.dims)], indexing="ij", sparse=sparse)

    def broadcast(self, values: np.ndarray, axis: int | str) -> np.ndarray:
        """Reshape a 1D per-axis array so it broadcasts against the full grid."""
        i = self.axis_index(axis) if isinstance(axis, str) else axis
        shape = [1] * self.dims
        shape[i] = -1
        return np.asarray(values).reshape(shape)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape, dtype=np.complex128)


@dataclass
class ComplexField:
    grid: SimGrid
    amplitude: np.ndarray
    spectral: bool = False

    def __post_init__(self):
        self.amplitude = np.asarray(self.amplitude, dtype=np.complex128)
        if self.amplitude.shape != self.grid.shape:
            raise ValueError(f"amplitude shape {self.amplitude.shape} does not match grid {self.grid.shape}")

    def density(self) -> np.ndarray:
        return self.amplitude.real**2 + self.amplitude.imag**2

    def copy(self) -> "ComplexField":
        return ComplexField(self.grid, self.amplitude.copy(), self.spectral)


def _check(field: ComplexField, spectral: bool):
    if field.amplitude.ndim != field.grid.dims:
        raise ValueError("dimension mismatch between field and grid")
    if field.spectral != spectral:
        raise ValueError("field is already in the requested representation")


def transform_forward(field: ComplexField) -> ComplexField:
    _check(field, spectral=False)
    g = field.grid
    scale = g.dV / (2 * math.pi) ** (g.dims / 2)
    return ComplexField(g, sfft.fftn(field.amplitude) * scale, spectral=True)


def transform_inverse(field: ComplexField) -> ComplexField:
    _check(field, spectral=True)
    g = field.grid
    scale = g.dV / (2 * math.pi) ** (g.dims / 2)
    return ComplexField(g, sfft.ifftn(field.amplitude) / scale, spectral=False)


def atom_number(field: ComplexField) -> float:
    cell = field.grid.dK if field.spectral else field.grid.dV
    return float(np.sum(field.density()) * cell)


def centroid_and_rms(field: ComplexField, axis: int | str) -> tuple[float, float]:
    """First moment and rms width of |psi|^2 along one position axis."""
    if field.spectral:
        raise ValueError("centroid_and_rms expects a position-space field")
    g = field.grid
    i = g.axis_index(axis) if isinstance(axis, str) else axis
    others = tuple(j for j in range(g.dims) if j != i)
    marginal = field.density().sum(axis=others)
    return _moments(g.coord(i), marginal)


def _moments(coord: np.ndarray, weights: np.ndarray) -> tuple[float, float]:
    total = weights.sum()
    if not total > 0:
        raise ValueError("zero-norm field has no centroid")
    mean = float(np.dot(coord, weights) / total)
    var = float(np.dot((coord - mean) ** 2, weights) / total)
    return mean, math.sqrt(max(var, 0.0))


def absorber_profile(grid: SimGrid, fraction: float = 0.08, axes: tuple[str, ...] | None = None) -> np.ndarray:
    """Dimensionless absorber shape in [0, 1] on the grid.

    Each axis contributes a sin^2 ramp that rises from 0 at the inner edge of
    the outer ``fraction`` layer to 1 at the domain boundary.
    """
    shape = np.zeros(grid.shape)
    names = grid.axis_names if axes is None else axes
    for name in names:
        i = grid.axis_index(name)
        n = grid.points[i]
        idx = np.arange(n) + 0.5
        depth = fraction * n
        # distance into the layer measured from its inner edge, in [0, 1]
        s = np.clip((depth - np.minimum(idx, n - idx)) / depth, 0.0, 1.0)
        ramp = np.sin(0.5 * math.pi * s) ** 2
        shape = np.maximum(shape, grid.broadcast(ramp, i))
    return shape


# --- binary snapshots ---------------------------------------------------------

def write_snapshot(path, grid: SimGrid, time: float, psi0: np.ndarray, psin: np.ndarray) -> None:
    header = SNAPSHOT_MAGIC + struct.pack("<HB", SNAPSHOT_VERSION, grid.dims)
    header += struct.pack(f"<{grid.dims}I", *grid.points)
    header += struct.pack(f"<{grid.dims}d", *grid.extent)
    header += struct.pack("<d", time)
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in (psi0, psin):
            if arr.shape != grid.shape:
                raise ValueError("field shape does not match grid")
            # Fortran order on (x, ..., z) arrays puts x fastest
            fh.write(np.asarray(arr, dtype="<c16").tobytes(order="F"))


@dataclass
class Snapshot:
    points: tuple[int, ...]
    extent: tuple[float, ...]
    time: float
    psi0: np.ndarray = field(repr=False)
    psin: np.ndarray = field(repr=False)

    def check_grid(self, grid: SimGrid) -> None:
        if len(self.points) != grid.dims or tuple(self.points) != grid.points:
            raise SnapshotError(f"snapshot dims {self.points} do not match grid {grid.points}")
        if not np.allclose(self.extent, grid.extent, rtol=1e-12, atol=0):
            raise SnapshotError(f"snapshot extents {self.extent} do not match grid {grid.extent}")


def read_snapshot(path) -> Snapshot:
    data = Path(path).read_bytes()
    if data[:4] != SNAPSHOT_MAGIC:
        raise SnapshotError(f"{path}: bad magic {data[:4]!r}, expected {SNAPSHOT_MAGIC!r}")
    version, dims = struct.unpack_from("<HB", data, 4)
    if version != SNAPSHOT_VERSION:
        raise SnapshotError(f"{path}: unsupported snapshot version {version}")
    if dims not in (2, 3):
        raise SnapshotError(f"{path}: invalid dims {dims}")
    off = 7
    points = struct.unpack_from(f"<{dims}I", data, off)
    off += 4 * dims
    extent = struct.unpack_from(f"<{dims}d", data, off)
    off += 8 * dims
    (time,) = struct.unpack_from("<d", data, off)
    off += 8
    count = int(np.prod(points))
    if len(data) != off + 2 * 16 * count:
        raise SnapshotError(f"{path}: truncated or oversized payload")
    flat = np.frombuffer(data, dtype="<c16", offset=off)
    psi0 = flat[:count].reshape(points, order="F").astype(np.complex128)
    psin = flat[count:].reshape(points, order="F").astype(np.complex128)
    return Snapshot(tuple(points), tuple(extent), time, psi0, psin)
