"""Fourier-multiplier lifting Psi(x1, x2) = chi(x1 <D>) phi(x2) of a periodic front to the half-plane."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FrontSample:
    """Samples of a front on N equispaced points of [0, L)."""

    values: np.ndarray
    L: float

    def __post_init__(self):
        v = np.asarray(self.values)
        n = v.shape[-1]
        if n < 16 or n & (n - 1):
            raise ValueError(f"N must be a power of two >= 16, got {n}")
        if not np.all(np.isfinite(v)):
            raise ValueError("front values must be finite")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.shape[-1]

    @property
    def x(self) -> np.ndarray:
        return self.L * np.arange(self.N) / self.N

    @property
    def xi(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.N, self.L / self.N)

    @property
    def bracket(self) -> np.ndarray:
        return np.sqrt(1 + self.xi**2)

    def spectrum(self) -> np.ndarray:
        return np.fft.fft(self.values, axis=-1)

    @classmethod
    def from_function(cls, fn, N: int, L: float) -> "FrontSample":
        return cls(fn(L * np.arange(N) / N), L)


def sobolev_norm(front: FrontSample, s: float) -> float:
    """(L/N^2 sum <xi>^(2s) |phi_hat|^2)^(1/2), the spectral H^s norm on the torus."""
    F = front.spectrum()
    return math.sqrt(front.L / front.N**2 * float(np.sum(front.bracket ** (2 * s) * np.abs(F) ** 2)))


def h2_norm(front: FrontSample) -> float:
    return sobolev_norm(front, 2.0)


def _smoothstep(u):
    return u * u * (3 - 2 * u)


def _smoothstep_integral(u):
    return u**3 - 0.5 * u**4


@dataclass(frozen=True)
class CutoffSpec:
    """Even C^2 cutoff: 1 on [-1, 1], 0 outside [-M, M], |chi'| <= 2/M.

    On [1, M] the slope profile is a trapezoid whose two shoulders of relative
    width ``a`` are cubic smoothsteps, so chi' and chi'' are continuous.
    """

    M: float
    a: float

    @property
    def max_slope(self) -> float:
        return 1.0 / ((1 - self.a) * (self.M - 1))

    def _t(self, s):
        return np.clip((np.abs(np.asarray(s, dtype=float)) - 1) / (self.M - 1), 0.0, 1.0)

    def _profile(self, t):
        a = self.a
        return np.where(
            t < a,
            _smoothstep(np.clip(t / a, 0, 1)),
            np.where(t > 1 - a, _smoothstep(np.clip((1 - t) / a, 0, 1)), 1.0),
        )

    def __call__(self, s) -> np.ndarray:
        a, t = self.a, self._t(s)
        P = np.where(
            t < a,
            a * _smoothstep_integral(np.clip(t / a, 0, 1)),
            np.where(t > 1 - a, (1 - a) - a * _smoothstep_integral(np.clip((1 - t) / a, 0, 1)), 0.5 * a + (t - a)),
        )
        return 1.0 - P / (1 - a)

    def derivative(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return -np.sign(s) * self._profile(self._t(s)) * self.max_slope


def make_cutoff(M: float) -> CutoffSpec:
    """Cutoff with support in [-M, M].

    The slope bound 2/M cannot be met by any monotone ramp from 1 to 0 on [1, M]
    when M <= 2, so those values are rejected.
    """
    if not M > 2:
        raise ValueError(f"M must exceed 2 for |chi'| <= 2/M to be attainable, got {M}")
    a = min(0.25, 0.9 * (M - 2) / (2 * (M - 1)))
    return CutoffSpec(float(M), a)


def _apply(front: FrontSample, multiplier: np.ndarray) -> np.ndarray:
    out = np.fft.ifft(multiplier * front.spectrum(), axis=-1)
    return out.real if np.isrealobj(front.values) else out


def lift(front: FrontSample, cutoff: CutoffSpec, x1_grid) -> np.ndarray:
    """Rows Psi(x1, .) = IDFT[chi(x1 <xi>) phi_hat], shape (len(x1_grid), N)."""
    x1 = np.atleast_1d(np.asarray(x1_grid, dtype=float))
    return _apply(front, cutoff(np.multiply.outer(x1, front.bracket)))


def lift_dx1(front: FrontSample, cutoff: CutoffSpec, x1_grid) -> np.ndarray:
    """Exact normal derivative: multiplier chi'(x1 <xi>) <xi>."""
    x1 = np.atleast_1d(np.asarray(x1_grid, dtype=float))
    br = front.bracket
    return _apply(front, cutoff.derivative(np.multiply.outer(x1, br)) * br)


def batch_lift(fronts, cutoff: CutoffSpec, x1_grid) -> np.ndarray:
    """Lift a sequence of fronts (e.g. successive times), shape (n_fronts, len(x1_grid), N)."""
    return np.stack([lift(f, cutoff, x1_grid) for f in fronts])


def verify_flatness(psi: np.ndarray, h: float) -> float:
    """Max over x2 of the second-order one-sided difference for d/dx1 at x1 = 0.

    ``psi`` rows must be x1 = 0, h, 2h.
    """
    d = (-3 * psi[0] + 4 * psi[1] - psi[2]) / (2 * h)
    return float(np.abs(d).max())


@dataclass(frozen=True)
class DecayResult:
    M: list
    sup_dx1: list
    ratios: list  # sup |d1 Psi| M^(3/4) / ||phi||_H2
    constant: float
    exponent: float  # fitted d log(sup) / d log(M)
    bounded: bool
    monotone: bool


def sup_dx1(front: FrontSample, cutoff: CutoffSpec, n_x1: int = 1024) -> float:
    """sup over x1 in [0, M] and the x2 grid of |d1 Psi|; d1 Psi vanishes for x1 > M."""
    x1 = np.linspace(0.0, cutoff.M, n_x1)
    return float(np.abs(lift_dx1(front, cutoff, x1)).max())


def linf_decay_check(front: FrontSample, M_list, n_x1: int = 1024, slack: float = 1.05) -> DecayResult:
    """Check that sup |d1 Psi| M^(3/4) / ||phi||_H2 stays below the value fitted at the smallest M."""
    Ms = [float(m) for m in M_list]
    norm = h2_norm(front)
    sups = [sup_dx1(front, make_cutoff(m), n_x1) for m in Ms]
    if norm == 0:
        return DecayResult(Ms, sups, [0.0] * len(Ms), 0.0, 0.0, True, True)
    ratios = [s * m**0.75 / norm for s, m in zip(sups, Ms)]
    C = ratios[0] * slack
    exponent = float(np.polyfit(np.log(Ms), np.log(sups), 1)[0])
    monotone = all(b <= a * (1 + 1e-12) for a, b in zip(sups, sups[1:]))
    return DecayResult(Ms, sups, ratios, C, exponent, all(r <= C for r in ratios), monotone)


@dataclass(frozen=True)
class DiffeoResult:
    ok: bool
    min_jacobian: float
    M: float


def diffeo_check(front: FrontSample, cutoff: CutoffSpec, x1_grid=None) -> DiffeoResult:
    """min over the grid of 1 + d1 Psi, which must stay >= 1/2 for x1 -> x1 + Psi to be a diffeomorphism."""
    x1 = np.linspace(0.0, cutoff.M, 512) if x1_grid is None else np.asarray(x1_grid, dtype=float)
    d = lift_dx1(front, cutoff, x1)
    m = float(1 + np.min(d.real))
    return DiffeoResult(m >= 0.5, m, cutoff.M)


def lifted_sobolev_ratio(front: FrontSample, cutoff: CutoffSpec, m: int, x1_grid) -> float:
    """||Psi||^2 in L2(x1 > 0; H^m(x2)) over ||phi||^2 in H^(m - 1/2), by trapezoid in x1."""
    psi_hat = cutoff(np.multiply.outer(np.asarray(x1_grid, dtype=float), front.bracket)) * front.spectrum()
    rows = front.L / front.N**2 * np.sum(front.bracket ** (2 * m) * np.abs(psi_hat) ** 2, axis=-1)
    den = sobolev_norm(front, m - 0.5) ** 2
    return float(np.trapezoid(rows, x1_grid) / den) if den > 0 else 0.0
