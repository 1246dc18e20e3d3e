"""Periodic grids, fields, transforms, derivatives, and mixed norms.

Conventions, fixed once for the whole package:

* space is the n-torus [0, L)^n sampled at N points per axis; the dual
  lattice is xi_k = 2 pi k / L with k in {-N/2, ..., N/2 - 1}^n,
* the L2 norm of a field carries the physical measure (L/N)^n, and the
  spectral coefficients are scaled so that Plancherel is an equality,
* |grad|^s annihilates the xi = 0 mode whenever s != 0,
* time is a uniform window t_j = t0 + j dt, j = 0 .. M-1; the window
  length is T = (M - 1) dt and temporal DFT frequencies are
  tau_m = 2 pi m / (M dt).
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ArityError, ShapeError


@dataclass(frozen=True)
class FrequencyGrid:
    """Spatial grid: dimension n in {1,2,3}, N points per axis, period L."""

    dimension: int
    points_per_axis: int
    period: float

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ShapeError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        n = self.points_per_axis
        if n < 2 or n % 2 != 0 or (n & (n - 1)) != 0:
            raise ShapeError(f"points_per_axis must be an even power of two, got {n}")
        if not self.period > 0:
            raise ShapeError("period must be positive")

    @property
    def n(self) -> int:
        return self.dimension

    @property
    def N(self) -> int:
        return self.points_per_axis

    @property
    def L(self) -> float:
        return self.period

    @property
    def dx(self) -> float:
        return self.period / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dimension

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dimension

    @cached_property
    def xi_axis(self) -> np.ndarray:
        """1d dual lattice in fft order, xi = 2 pi k / L."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=1.0 / self.N) / self.L

    @cached_property
    def xi_components(self) -> tuple:
        axes = np.meshgrid(*([self.xi_axis] * self.n), indexing="ij")
        return tuple(axes)

    @cached_property
    def xi_norm(self) -> np.ndarray:
        return np.sqrt(sum(c ** 2 for c in self.xi_components))

    @cached_property
    def x_axis(self) -> np.ndarray:
        return np.arange(self.N) * self.dx

    def coordinates(self) -> tuple:
        return tuple(np.meshgrid(*([self.x_axis] * self.n), indexing="ij"))

    @property
    def xi_min(self) -> float:
        """Smallest nonzero mode magnitude."""
        return 2.0 * np.pi / self.L

    @property
    def xi_max(self) -> float:
        """Per-axis Nyquist magnitude pi N / L."""
        return np.pi * self.N / self.L


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    dt: float
    samples: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ShapeError("dt must be positive")
        if self.samples < 1:
            raise ArityError("need at least one time sample")

    @property
    def M(self) -> int:
        return self.samples

    @cached_property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples)

    @property
    def window_length(self) -> float:
        return self.dt * (self.samples - 1)

    @cached_property
    def tau_axis(self) -> np.ndarray:
        """Temporal DFT frequencies in fft order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.samples, d=self.dt)

    @property
    def tau_spacing(self) -> float:
        return 2.0 * np.pi / (self.samples * self.dt)

    @property
    def tau_nyquist(self) -> float:
        return np.pi / self.dt

    def index_of(self, t: float) -> int:
        """Nearest sample index, clipped to the window."""
        j = int(round((t - self.t0) / self.dt))
        return min(max(j, 0), self.samples - 1)


def _as_components(values: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    if values.shape == grid.shape:
        values = values[np.newaxis]
    if values.ndim != grid.n + 1 or values.shape[1:] != grid.shape:
        raise ShapeError(f"value shape {values.shape} does not fit grid {grid.shape}")
    if values.shape[0] not in (1, 3):
        raise ShapeError(f"component count must be 1 or 3, got {values.shape[0]}")
    return values


@dataclass
class SpatialField:
    """c-component complex samples on a FrequencyGrid (c = 1 or 3)."""

    grid: FrequencyGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = _as_components(self.values, self.grid)

    @property
    def components(self) -> int:
        return self.values.shape[0]

    def l2(self) -> float:
        return float(np.sqrt(self.grid.cell_volume * np.sum(np.abs(self.values) ** 2)))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def copy(self) -> "SpatialField":
        return SpatialField(self.grid, self.values.copy())

    def __add__(self, other: "SpatialField") -> "SpatialField":
        _check_same_grid(self, other)
        return SpatialField(self.grid, self.values + other.values)

    def __sub__(self, other: "SpatialField") -> "SpatialField":
        _check_same_grid(self, other)
        return SpatialField(self.grid, self.values - other.values)

    def __mul__(self, scalar) -> "SpatialField":
        return SpatialField(self.grid, self.values * scalar)

    __rmul__ = __mul__


@dataclass
class SpectralField:
    """Fourier coefficients of a SpatialField, unitary normalization."""

    grid: FrequencyGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = _as_components(self.values, self.grid)

    def l2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)))


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise ShapeError("fields live on different grids")
    if a.values.shape != b.values.shape:
        raise ShapeError(f"shape mismatch {a.values.shape} vs {b.values.shape}")


def transform(field: SpatialField) -> SpectralField:
    """Forward DFT with Plancherel-unitary scaling: l2(spectrum) = L2(field)."""
    grid = field.grid
    axes = tuple(range(1, grid.n + 1))
    scale = grid.L ** (grid.n / 2.0) / grid.N ** grid.n
    return SpectralField(grid, np.fft.fftn(field.values, axes=axes) * scale)


def inverse_transform(spec: SpectralField) -> SpatialField:
    grid = spec.grid
    axes = tuple(range(1, grid.n + 1))
    scale = grid.L ** (grid.n / 2.0) / grid.N ** grid.n
    return SpatialField(grid, np.fft.ifftn(spec.values / scale, axes=axes))


def apply_spatial_symbol(field: SpatialField, symbol: np.ndarray) -> SpatialField:
    """Multiply the spatial spectrum by symbol(xi); symbol indexed in fft order."""
    grid = field.grid
    axes = tuple(range(1, grid.n + 1))
    fhat = np.fft.fftn(field.values, axes=axes)
    fhat *= symbol
    return SpatialField(grid, np.fft.ifftn(fhat, axes=axes))


def gradient_power(field: SpatialField, s: float) -> SpatialField:
    """|grad|^s as a Fourier multiplier |xi|^s; the xi = 0 mode maps to 0 for s != 0."""
    if s == 0:
        return field.copy()
    xi = field.grid.xi_norm
    sym = np.zeros_like(xi)
    nz = xi > 0
    sym[nz] = xi[nz] ** s
    return apply_spatial_symbol(field, sym)


def partial_derivative(field: SpatialField, axis: int) -> SpatialField:
    """Spectral d/dx_axis, exact on lattice exponentials."""
    grid = field.grid
    if not 0 <= axis < grid.n:
        raise ShapeError(f"axis {axis} out of range for dimension {grid.n}")
    return apply_spatial_symbol(field, 1j * grid.xi_components[axis])


@dataclass
class SpaceTimeField:
    """M spatial snapshots on a shared grid and uniform time window."""

    timegrid: TimeGrid
    grid: FrequencyGrid
    values: np.ndarray  # (M, c, N, ..., N)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == self.grid.n + 1:
            v = v[:, np.newaxis]
        if v.shape[0] != self.timegrid.M or v.shape[2:] != self.grid.shape:
            raise ShapeError(f"space-time value shape {v.shape} does not fit grids")
        if v.shape[1] not in (1, 3):
            raise ShapeError(f"component count must be 1 or 3, got {v.shape[1]}")
        self.values = v

    @property
    def components(self) -> int:
        return self.values.shape[1]

    def snapshot(self, j: int) -> SpatialField:
        return SpatialField(self.grid, self.values[j])

    def l2_profile(self) -> np.ndarray:
        """||u(t_j)||_{L2} for every sample time."""
        vol = self.grid.cell_volume
        flat = self.values.reshape(self.timegrid.M, -1)
        return np.sqrt(vol * np.sum(np.abs(flat) ** 2, axis=1))

    def copy(self) -> "SpaceTimeField":
        return SpaceTimeField(self.timegrid, self.grid, self.values.copy())

    def __add__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        if self.timegrid != other.timegrid:
            raise ShapeError("fields live on different time grids")
        _check_same_grid(self, other)
        return SpaceTimeField(self.timegrid, self.grid, self.values + other.values)

    def __sub__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        if self.timegrid != other.timegrid:
            raise ShapeError("fields live on different time grids")
        _check_same_grid(self, other)
        return SpaceTimeField(self.timegrid, self.grid, self.values - other.values)

    def __mul__(self, scalar) -> "SpaceTimeField":
        return SpaceTimeField(self.timegrid, self.grid, self.values * scalar)

    __rmul__ = __mul__


def from_snapshots(timegrid: TimeGrid, snapshots) -> SpaceTimeField:
    snaps = list(snapshots)
    if len(snaps) != timegrid.M:
        raise ArityError(f"expected {timegrid.M} snapshots, got {len(snaps)}")
    grid = snaps[0].grid
    for s in snaps[1:]:
        _check_same_grid(snaps[0], s)
    return SpaceTimeField(timegrid, grid, np.stack([s.values for s in snaps]))


def scalar_series(values, dt: float = 1.0, t0: float = 0.0) -> SpaceTimeField:
    """Embed a scalar sequence as spatially constant snapshots on a unit cell,
    so the L2 norm of each snapshot equals the scalar magnitude."""
    values = np.asarray(values, dtype=complex)
    grid = FrequencyGrid(1, 2, 1.0)
    tg = TimeGrid(t0, dt, len(values))
    vals = np.broadcast_to(values[:, None, None], (len(values), 1, 2)).copy()
    return SpaceTimeField(tg, grid, vals)


def time_derivative(u: SpaceTimeField, mode: str = "fd4") -> SpaceTimeField:
    """d/dt along the window.

    mode "fd4": centered 4th order finite differences in the interior with
    one-sided 4th order stencils at the window edges (no periodicity in t).
    mode "spectral": differentiation of the temporal trigonometric
    interpolant; exact for fields resolved on the window's tau lattice, but
    treats the window as periodic.
    """
    M = u.timegrid.M
    if M < 2:
        raise ArityError("time derivative needs at least two snapshots")
    if mode == "spectral":
        uhat = np.fft.fft(u.values, axis=0)
        tau = u.timegrid.tau_axis.reshape((M,) + (1,) * (u.values.ndim - 1))
        return SpaceTimeField(u.timegrid, u.grid, np.fft.ifft(1j * tau * uhat, axis=0))
    if mode != "fd4":
        raise ValueError(f"unknown time derivative mode {mode!r}")
    if M < 5:
        # fall back to low order differences on very short windows
        out = np.gradient(u.values, u.timegrid.dt, axis=0)
        return SpaceTimeField(u.timegrid, u.grid, out)
    v = u.values
    dt = u.timegrid.dt
    out = np.empty_like(v)
    out[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * dt)
    # one-sided 4th order stencils at the four edge samples
    c0 = np.array([-25, 48, -36, 16, -3], dtype=float) / 12.0
    c1 = np.array([-3, -10, 18, -6, 1], dtype=float) / 12.0
    out[0] = sum(c * v[k] for k, c in enumerate(c0)) / dt
    out[1] = sum(c * v[k] for k, c in enumerate(c1)) / dt
    out[-1] = -sum(c * v[-1 - k] for k, c in enumerate(c0)) / dt
    out[-2] = -sum(c * v[-1 - k] for k, c in enumerate(c1)) / dt
    return SpaceTimeField(u.timegrid, u.grid, out)


def mixed_norm(u: SpaceTimeField, p: float) -> float:
    """L^p_t L^2_x over the window: trapezoidal in t, exact sup for p = inf."""
    if not p >= 1:
        raise ValueError("p must be >= 1")
    prof = u.l2_profile()
    if np.isinf(p):
        return float(np.max(prof))
    return float(np.trapezoid(prof ** p, dx=u.timegrid.dt) ** (1.0 / p))


# ---------------------------------------------------------------------------
# flat binary / CSV serialization
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<7d")  # n, N, L, c, M, t0, dt as little-endian float64


def write_field(path, u: SpaceTimeField) -> None:
    """Flat layout: 7-float header then row-major interleaved complex pairs."""
    g, tg = u.grid, u.timegrid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(g.n, g.N, g.L, u.components, tg.M, tg.t0, tg.dt))
        fh.write(np.ascontiguousarray(u.values, dtype="<c16").tobytes())


def read_field(path) -> SpaceTimeField:
    with open(path, "rb") as fh:
        n, N, L, c, M, t0, dt = _HEADER.unpack(fh.read(_HEADER.size))
        n, N, c, M = int(n), int(N), int(c), int(M)
        grid = FrequencyGrid(n, N, L)
        raw = np.frombuffer(fh.read(), dtype="<c16")
    values = raw.reshape((M, c) + grid.shape)
    return SpaceTimeField(TimeGrid(t0, dt, M), grid, values.astype(complex))


def write_snapshot(path, f: SpatialField) -> None:
    """A single snapshot is stored as a one-sample window."""
    tg = TimeGrid(0.0, 1.0, 1)
    write_field(path, SpaceTimeField(tg, f.grid, f.values[np.newaxis]))


def read_snapshot(path) -> SpatialField:
    u = read_field(path)
    return u.snapshot(0)


def field_to_csv(f: SpatialField) -> str:
    """Small-grid CSV dump: one row per grid point and component."""
    g = f.grid
    buf = io.StringIO()
    buf.write("component," + ",".join(f"i{a}" for a in range(g.n)) + ",re,im\n")
    for c in range(f.components):
        for idx in np.ndindex(*g.shape):
            v = f.values[(c,) + idx]
            buf.write(
                f"{c}," + ",".join(str(i) for i in idx) + f",{v.real:.17g},{v.imag:.17g}\n"
            )
    return buf.getvalue()
