"""Quasi-uniform point sets on the frequency hemisphere."""

from __future__ import annotations

import math

import numpy as np

from .symbol import FrequencyPoint


def hemisphere_grid_array(n: int) -> np.ndarray:
    """Rings of constant gamma = sin(phi_j), phi_j = (pi/2) j/n, as an (m, 3) array.

    Ring j holds round(4 n cos phi_j) points, the gamma = 0 circle holds 8n
    (double density) and the apex (1, 0, 0) closes the set. The boundary ring
    starts at angle 0, so (0, 0, +-1) are included.
    """
    if n < 8:
        raise ValueError(f"n must be at least 8, got {n}")
    rings = [_ring(0.0, 8 * n)]
    for j in range(1, n):
        phi = 0.5 * math.pi * j / n
        rings.append(_ring(phi, max(1, round(4 * n * math.cos(phi)))))
    rings.append(np.array([[1.0, 0.0, 0.0]]))
    return np.concatenate(rings)


def _ring(phi: float, count: int) -> np.ndarray:
    theta = 2 * np.pi * np.arange(count) / count
    c = math.cos(phi)
    pts = np.stack([np.full(count, math.sin(phi)), c * np.cos(theta), c * np.sin(theta)], axis=-1)
    if phi == 0.0:
        pts[:, 0] = 0.0
    return pts


def hemisphere_grid(n: int) -> list[FrequencyPoint]:
    return [FrequencyPoint(*map(float, p)) for p in hemisphere_grid_array(n)]


def boundary_circle(n: int) -> np.ndarray:
    theta = 2 * np.pi * np.arange(n) / n
    return np.stack([np.zeros(n), np.cos(theta), np.sin(theta)], axis=-1)
