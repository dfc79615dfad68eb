"""Uniform truncated k-grids, modal fields and the norms used throughout.

A grid holds ``n`` nodes per axis on ``[-k_max, k_max)`` with spacing ``dk``
and the exact DFT-dual r-grid with spacing ``dr = 2*pi/(2*k_max)``.  Modal
fields are complex arrays of shape ``(components, *grid.shape)`` tagged with
the frame they live in ('slow' or 'fast').
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch


@dataclass(frozen=True)
class Grid:
    """Truncated uniform k-grid and its dual r-grid."""

    dim: int
    n: tuple[int, ...]
    k_max: tuple[float, ...]

    def __post_init__(self):
        n = tuple(int(v) for v in np.atleast_1d(self.n))
        k_max = np.atleast_1d(self.k_max).astype(float)
        if k_max.size == 1 and self.dim > 1:
            k_max = np.repeat(k_max, self.dim)
        if len(n) == 1 and self.dim > 1:
            n = n * self.dim
        if len(n) != self.dim or k_max.size != self.dim:
            raise ValueError("grid arity does not match dim")
        for v in n:
            if v < 4 or (v & (v - 1)) != 0:
                raise ValueError("node counts must be powers of two >= 4")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "k_max", tuple(float(v) for v in k_max))

    # -- geometry -----------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def dk(self) -> tuple[float, ...]:
        return tuple(2.0 * km / nn for km, nn in zip(self.k_max, self.n))

    @property
    def dr(self) -> tuple[float, ...]:
        return tuple(np.pi / km for km in self.k_max)

    @property
    def cell(self) -> float:
        """Quadrature weight dk^d for L1 sums."""
        return float(np.prod(self.dk))

    def k_axis(self, axis: int = 0) -> np.ndarray:
        nn, km = self.n[axis], self.k_max[axis]
        return -km + (2.0 * km / nn) * np.arange(nn)

    def r_axis(self, axis: int = 0) -> np.ndarray:
        return self.dr[axis] * np.arange(self.n[axis])

    def k_mesh(self) -> np.ndarray:
        """Wavevector components, shape (dim, *shape)."""
        axes = [self.k_axis(a) for a in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    def abs_k(self) -> np.ndarray:
        return np.sqrt((self.k_mesh() ** 2).sum(axis=0))

    def index_of(self, k) -> tuple[int, ...]:
        """Nearest node index of a wavevector."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        idx = []
        for a in range(self.dim):
            j = int(round((k[a] + self.k_max[a]) / self.dk[a]))
            if not (0 <= j < self.n[a]):
                raise ValueError(f"wavevector {k} outside grid")
            idx.append(j)
        return tuple(idx)

    def padded(self, factor: int) -> "Grid":
        """Grid refined in r by zero-padding the spectrum (same dk)."""
        return Grid(
            self.dim,
            tuple(factor * v for v in self.n),
            tuple(factor * v for v in self.k_max),
        )

    def descriptor(self) -> dict:
        return {"dim": self.dim, "n": list(self.n), "k_max": list(self.k_max)}

    @staticmethod
    def from_descriptor(d: dict) -> "Grid":
        return Grid(int(d["dim"]), tuple(d["n"]), tuple(d["k_max"]))


@dataclass
class ModalField:
    """Complex components sampled on a k-grid."""

    grid: Grid
    values: np.ndarray  # (components, *grid.shape)
    frame: str = "slow"  # 'slow' or 'fast'

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=complex)
        if self.values.shape[1:] != self.grid.shape:
            raise ValueError("values shape does not match grid")
        if self.frame not in ("slow", "fast"):
            raise ValueError("frame must be 'slow' or 'fast'")
        if not np.isfinite(self.values).all():
            raise ValueError("field values must be finite")

    @property
    def ncomp(self) -> int:
        return self.values.shape[0]

    def copy(self) -> "ModalField":
        return ModalField(self.grid, self.values.copy(), self.frame)

    def zeros_like(self) -> "ModalField":
        return ModalField(self.grid, np.zeros_like(self.values), self.frame)


def require_same_grid(*fields: ModalField) -> Grid:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatch("fields live on different grids")
    return g


# -- Fourier transforms -----------------------------------------------------
#
# Conventions: U(r) = (2*pi)^-d * integral(U_hat(k) e^{ikr} dk) and
# U_hat(k) = integral(U(r) e^{-ikr} dr), discretised with the trapezoid
# weights dk^d and dr^d so that forward(inverse(x)) == x exactly.

def spectrum_to_samples(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Inverse transform of k-samples to r-samples (per leading component)."""
    axes = tuple(range(values.ndim - grid.dim, values.ndim))
    scale = 1.0 / np.prod(grid.dr)
    return scale * np.fft.ifftn(np.fft.ifftshift(values, axes=axes), axes=axes)


def samples_to_spectrum(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Forward transform of r-samples to k-samples (per leading component)."""
    axes = tuple(range(values.ndim - grid.dim, values.ndim))
    scale = np.prod(grid.dr)
    return scale * np.fft.fftshift(np.fft.fftn(values, axes=axes), axes=axes)


def to_r_space(f: ModalField) -> np.ndarray:
    return spectrum_to_samples(f.values, f.grid)


def from_r_space(samples: np.ndarray, grid: Grid, frame: str = "slow") -> ModalField:
    return ModalField(grid, samples_to_spectrum(samples, grid), frame)


def pad_spectrum(values: np.ndarray, grid: Grid, factor: int) -> np.ndarray:
    """Zero-pad high-|k| tails so degree-m products de-alias exactly."""
    if factor == 1:
        return values
    pads = [(0, 0)] * (values.ndim - grid.dim)
    for a in range(grid.dim):
        w = (factor - 1) * grid.n[a] // 2
        pads.append((w, w))
    return np.pad(values, pads)


def crop_spectrum(values: np.ndarray, grid: Grid, factor: int) -> np.ndarray:
    if factor == 1:
        return values
    sl = [slice(None)] * (values.ndim - grid.dim)
    for a in range(grid.dim):
        w = (factor - 1) * grid.n[a] // 2
        sl.append(slice(w, w + grid.n[a]))
    return values[tuple(sl)]


# -- norms ------------------------------------------------------------------

def pointwise_modulus(values: np.ndarray) -> np.ndarray:
    """Euclidean modulus over the leading component axis."""
    return np.sqrt((values.real ** 2 + values.imag ** 2).sum(axis=0))


def l1_norm(f: ModalField, a: float = 0.0) -> float:
    """L1 norm of the modulus, optionally with weight (1+|k|)^a."""
    mod = pointwise_modulus(f.values)
    if a != 0.0:
        mod = mod * (1.0 + f.grid.abs_k()) ** a
    return float(mod.sum() * f.grid.cell)


def l1_norm_values(values: np.ndarray, grid: Grid, a: float = 0.0) -> float:
    mod = pointwise_modulus(values)
    if a != 0.0:
        mod = mod * (1.0 + grid.abs_k()) ** a
    return float(mod.sum() * grid.cell)


def linf_r_norm(f: ModalField) -> float:
    """Sup of |U(r)| of the r-space reconstruction."""
    return float(pointwise_modulus(to_r_space(f)).max())


def sup_time_norm(fields, a: float = 0.0) -> float:
    """Sup over stored time samples of the (weighted) L1 norm."""
    return max(l1_norm(f, a) for f in fields)


def gradient_k(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Central-difference k-gradient with periodic wrap.

    Input (..., *shape); output (dim, ..., *shape).
    """
    out = []
    for a in range(grid.dim):
        ax = values.ndim - grid.dim + a
        out.append(
            (np.roll(values, -1, axis=ax) - np.roll(values, 1, axis=ax))
            / (2.0 * grid.dk[a])
        )
    return np.stack(out)


__all__ = [
    "Grid",
    "ModalField",
    "require_same_grid",
    "spectrum_to_samples",
    "samples_to_spectrum",
    "to_r_space",
    "from_r_space",
    "pad_spectrum",
    "crop_spectrum",
    "pointwise_modulus",
    "l1_norm",
    "l1_norm_values",
    "linf_r_norm",
    "sup_time_norm",
    "gradient_k",
]
