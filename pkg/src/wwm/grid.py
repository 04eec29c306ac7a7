"""Uniform periodic grids, sampled complex fields, and the Fourier convention.

All transforms in this package use the symmetric continuum convention

    g(p) = (2*pi)**-0.5 * integral dx f(x) exp(-i*x*p)

with hbar = 1, discretized as a Riemann sum over the grid.  The factor
dx/sqrt(2*pi) and the phase exp(-i*x_min*p) make the discrete transform
converge to the continuum integral as the grid is refined, so values
computed here are directly comparable to closed-form transforms.  The
momentum grid spans [-pi/dx, pi/dx) in steps of dp = 2*pi/(n*dx).
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GridError

SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of n points x_j = x_min + j*dx on [x_min, x_max)."""

    x_min: float
    x_max: float
    n: int

    @property
    def length(self):
        return self.x_max - self.x_min

    @property
    def dx(self):
        return self.length / self.n

    @property
    def dp(self):
        return 2.0 * np.pi / (self.n * self.dx)

    @cached_property
    def xs(self):
        return self.x_min + self.dx * np.arange(self.n)

    @cached_property
    def ps(self):
        """Momentum samples in ascending order, [-pi/dx, pi/dx)."""
        return 2.0 * np.pi * np.fft.fftshift(np.fft.fftfreq(self.n, d=self.dx))

    def refined(self, factor=2):
        """Same interval sampled `factor` times more densely.

        The refined grid keeps dp unchanged while extending the covered
        momentum range by `factor`, which is how channel transforms are
        evaluated at momentum differences beyond the base grid.
        """
        return GridSpec(self.x_min, self.x_max, self.n * factor)


def make_grid(x_min, x_max, n):
    """Validate and build a GridSpec.  n must be a power of two, >= 16."""
    n = int(n)
    if n < 16 or (n & (n - 1)) != 0:
        raise GridError(f"grid size must be a power of two >= 16, got {n}")
    if not (x_max > x_min):
        raise GridError(f"degenerate interval [{x_min}, {x_max}]")
    return GridSpec(float(x_min), float(x_max), n)


@dataclass
class ComplexField:
    """Complex samples on a grid, tagged with the space they live in."""

    grid: GridSpec
    values: np.ndarray
    space: str  # "position" or "momentum"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.n,):
            raise GridError(
                f"field has {self.values.shape} samples, grid wants ({self.grid.n},)"
            )
        if self.space not in ("position", "momentum"):
            raise GridError(f"unknown space tag {self.space!r}")

    def norm_sq(self):
        d = self.grid.dx if self.space == "position" else self.grid.dp
        return float(np.sum(np.abs(self.values) ** 2) * d)


def position_field(grid, values):
    return ComplexField(grid, values, "position")


def momentum_field(grid, values):
    return ComplexField(grid, values, "momentum")


def fourier_values(grid, values):
    """Forward transform of raw position samples; returns momentum samples.

    Matches grid.ps ordering.  Kept separate from the ComplexField wrapper
    because the inner numeric loops work on bare arrays.
    """
    spectrum = np.fft.fftshift(np.fft.fft(values))
    return grid.dx / SQRT_2PI * np.exp(-1j * grid.x_min * grid.ps) * spectrum


def inverse_fourier_values(grid, values):
    """Inverse of fourier_values."""
    spectrum = np.fft.ifftshift(values * np.exp(1j * grid.x_min * grid.ps))
    return SQRT_2PI / grid.dx * np.fft.ifft(spectrum)


def spectral_refine(grid, values, factor=2):
    """Band-limited resampling of position samples onto a refined grid.

    Zero-pads the spectrum, so it is exact for fields whose momentum
    content fits the original box (anything this package produces).
    """
    fine = grid.refined(factor)
    spectrum = fourier_values(grid, values)
    padded = np.zeros(fine.n, dtype=complex)
    lo = (fine.n - grid.n) // 2
    padded[lo : lo + grid.n] = spectrum
    return fine, inverse_fourier_values(fine, padded)


def forward_ft(field):
    """Position-space field -> momentum-space field."""
    if field.space != "position":
        raise GridError("forward_ft expects a position-space field")
    return momentum_field(field.grid, fourier_values(field.grid, field.values))


def inverse_ft(field):
    """Momentum-space field -> position-space field."""
    if field.space != "momentum":
        raise GridError("inverse_ft expects a momentum-space field")
    return position_field(field.grid, inverse_fourier_values(field.grid, field.values))
