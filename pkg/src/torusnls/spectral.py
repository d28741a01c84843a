"""Spectral primitives on the 2*pi-periodic torus.

Conventions, fixed once and used everywhere downstream:

* A field is stored as Fourier coefficients ``u_hat[k]`` on the symmetric
  window ``k in {-K, ..., K}`` with ``u_hat_k = (1/2pi) * int u e^{-ikx} dx``,
  so that ``u(x) = sum_k u_hat_k e^{ikx}`` and products of functions are
  plain (unweighted) convolutions of coefficients.
* Sobolev norms weight coefficients by the bracket ``<k> = (1+k^2)^(1/2)``
  with no 2*pi factor: ``|u|_{H^s}^2 = sum <k>^{2s} |u_hat_k|^2``.
* Physical samples live on a uniform grid of ``num_points`` points, where
  ``num_points`` is the smallest 5-smooth integer >= pad_factor*(2K+1).
  With pad_factor (p+1)/2 the grid quadrature is exact for products of
  degree p+1 in band-limited fields, which is what the nonlinearity and
  the L^q norms below need.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

TAU = 2.0 * np.pi


class DimensionMismatchError(ValueError):
    """Sample array length does not match the grid."""


def next_smooth(n: int) -> int:
    """Smallest integer >= n whose prime factors are all in {2, 3, 5}."""
    if n <= 1:
        return 1
    m = n
    while True:
        r = m
        for p in (2, 3, 5):
            while r % p == 0:
                r //= p
        if r == 1:
            return m
        m += 1


def modes(max_mode: int) -> np.ndarray:
    return np.arange(-max_mode, max_mode + 1)


@dataclass(frozen=True)
class GridSpec:
    """Frequency window and dealiasing ratio for one torus grid."""

    max_mode: int
    pad_factor: float = 3.0
    length: float = TAU

    def __post_init__(self):
        if self.max_mode < 1:
            raise ValueError(f"max_mode must be >= 1, got {self.max_mode}")
        if self.pad_factor < 1.0:
            raise ValueError(f"pad_factor must be >= 1, got {self.pad_factor}")
        if self.length != TAU:
            raise ValueError("only the 2*pi torus is supported")

    @property
    def n_coeffs(self) -> int:
        return 2 * self.max_mode + 1

    @property
    def num_points(self) -> int:
        return next_smooth(int(np.ceil(self.pad_factor * self.n_coeffs - 1e-9)))

    def supports_power(self, p: int) -> bool:
        """True when zero padding suffices for a degree-p product."""
        return 2.0 * self.pad_factor >= (p + 1) - 1e-12

    def x(self) -> np.ndarray:
        return TAU * np.arange(self.num_points) / self.num_points


@dataclass(eq=False)
class SpectralField:
    """A complex periodic field held as coefficients on {-K, ..., K}."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != (self.grid.n_coeffs,):
            raise DimensionMismatchError(
                f"expected {self.grid.n_coeffs} coefficients, got {self.coeffs.shape}"
            )

    # -- constructors -------------------------------------------------
    @classmethod
    def zeros(cls, grid: GridSpec) -> "SpectralField":
        return cls(grid, np.zeros(grid.n_coeffs, dtype=np.complex128))

    @classmethod
    def from_modes(cls, grid: GridSpec, amplitudes: dict[int, complex]) -> "SpectralField":
        out = cls.zeros(grid)
        for k, a in amplitudes.items():
            if abs(k) > grid.max_mode:
                raise ValueError(f"mode {k} outside window of K={grid.max_mode}")
            out.coeffs[k + grid.max_mode] = a
        return out

    @classmethod
    def plane_wave(cls, grid: GridSpec, k: int = 1, amplitude: complex = 1.0) -> "SpectralField":
        return cls.from_modes(grid, {k: amplitude})

    # -- helpers ------------------------------------------------------
    @property
    def k(self) -> np.ndarray:
        return modes(self.grid.max_mode)

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def coeff(self, k: int) -> complex:
        return complex(self.coeffs[k + self.grid.max_mode])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs.view(np.float64))))

    def conjugate_reflect(self) -> "SpectralField":
        """Coefficients of the pointwise complex conjugate field."""
        return SpectralField(self.grid, np.conj(self.coeffs[::-1]))

    # -- small arithmetic, same grid required --------------------------
    def _check(self, other: "SpectralField"):
        if other.grid != self.grid:
            raise DimensionMismatchError("grids differ")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__


@lru_cache(maxsize=64)
def _mode_slots(max_mode: int, num_points: int) -> np.ndarray:
    # position of mode k in the length-M FFT layout
    return modes(max_mode) % num_points


def synthesize(f: SpectralField) -> np.ndarray:
    """Evaluate the field on the padded physical grid."""
    grid = f.grid
    m = grid.num_points
    spec = np.zeros(m, dtype=np.complex128)
    spec[_mode_slots(grid.max_mode, m)] = f.coeffs
    return np.fft.ifft(spec) * m


def analyze(samples: np.ndarray, grid: GridSpec) -> SpectralField:
    """Project physical samples back onto the coefficient window.

    Inverse of synthesize for band-limited data; higher frequencies
    present in the samples are discarded.
    """
    samples = np.asarray(samples)
    m = grid.num_points
    if samples.shape != (m,):
        raise DimensionMismatchError(
            f"expected {m} samples for K={grid.max_mode}, got {samples.shape}"
        )
    spec = np.fft.fft(samples) / m
    return SpectralField(grid, spec[_mode_slots(grid.max_mode, m)])


def sobolev_norm(f: SpectralField, s: float) -> float:
    """H^s norm: l^2 of <k>^s-weighted coefficients."""
    w = (1.0 + f.k.astype(np.float64) ** 2) ** (s / 2.0)
    return float(np.linalg.norm(w * f.coeffs))


def lp_norm(f: SpectralField, q: float) -> float:
    """L^q(T) norm by quadrature on the padded grid.

    Exact for integer q with (q/2)-fold products resolved by the padding,
    in particular for q = p-1 and q = p+1 at pad_factor >= (p+1)/2.
    """
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    u = synthesize(f)
    dx = TAU / f.grid.num_points
    return float((np.sum(np.abs(u) ** q) * dx) ** (1.0 / q))


def project_band(f: SpectralField, n_low: int, n_high: int) -> SpectralField:
    """Zero all coefficients with |k| outside [n_low, n_high]."""
    if not 0 <= n_low <= n_high:
        raise ValueError(f"need 0 <= n_low <= n_high, got [{n_low}, {n_high}]")
    a = np.abs(f.k)
    keep = (a >= n_low) & (a <= n_high)
    return SpectralField(f.grid, np.where(keep, f.coeffs, 0.0))
