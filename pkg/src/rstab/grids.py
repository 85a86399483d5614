"""
Tensor-product parameter grids for leaf patches.

Three axis kinds are supported:

periodic
    equispaced nodes on [start, start + length); Fourier (or 4th-order
    central difference) differentiation; trapezoidal quadrature.
polar
    a latitude angle of a double-covered sphere. Nodes are offset
    equispaced on [0, 2 pi) so no node sits on a pole; functions
    pulled back from the sphere are smooth and 2 pi-periodic in the
    angle, so periodic differentiation applies. Only the first half
    (0, pi) carries quadrature weight; the weights integrate
    h(theta) sin^m(theta) exactly for cosine polynomials of degree < N/2,
    and are stored divided by sin^m(theta) so that multiplying by
    sqrt(det g) recovers the surface measure.
interval
    Chebyshev-Lobatto nodes on [a, b]; Chebyshev differentiation matrix;
    Clenshaw-Curtis quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

AXIS_KINDS = ("periodic", "polar", "interval")
METHODS = ("spectral", "fd4")


@dataclass(frozen=True, eq=False)
class Axis:
    kind: str
    nodes: np.ndarray
    weights: np.ndarray
    diff: np.ndarray
    period: float | None = None
    power: int = 0

    @property
    def size(self) -> int:
        return self.nodes.size

    @cached_property
    def diff2(self) -> np.ndarray:
        return self.diff @ self.diff


def fourier_diff_matrix(n: int, length: float = 2 * np.pi) -> np.ndarray:
    h = 2 * np.pi / n
    k = np.arange(n)
    diff = k[:, None] - k[None, :]
    d = np.zeros((n, n))
    off = diff != 0
    sign = np.where(diff % 2 == 0, 1.0, -1.0)
    if n % 2 == 0:
        d[off] = 0.5 * sign[off] / np.tan(diff[off] * h / 2)
    else:
        d[off] = 0.5 * sign[off] / np.sin(diff[off] * h / 2)
    return d * (2 * np.pi / length)


def fd4_periodic_matrix(n: int, length: float = 2 * np.pi) -> np.ndarray:
    if n < 5:
        raise ValueError("fourth-order stencil needs at least 5 nodes")
    h = length / n
    d = np.zeros((n, n))
    for offset, c in ((1, 8.0), (2, -1.0)):
        for j in range(n):
            d[j, (j + offset) % n] += c
            d[j, (j - offset) % n] -= c
    return d / (12 * h)


def periodic_axis(n: int, length: float = 2 * np.pi, start: float = 0.0,
                  method: str = "spectral") -> Axis:
    nodes = start + length * np.arange(n) / n
    d = fourier_diff_matrix(n, length) if method == "spectral" else fd4_periodic_matrix(n, length)
    weights = np.full(n, length / n)
    return Axis("periodic", nodes, weights, d, period=length)


def _polar_weights(m_half: int, power: int) -> np.ndarray:
    theta = (np.arange(m_half) + 0.5) * np.pi / m_half
    xg, wg = np.polynomial.legendre.leggauss(m_half + power + 64)
    tg = 0.5 * np.pi * (xg + 1)
    wg = 0.5 * np.pi * wg
    k = np.arange(m_half)
    moments = (np.cos(np.outer(k, tg)) * np.sin(tg) ** power) @ wg
    basis = np.cos(np.outer(theta, k))
    return np.linalg.solve(basis.T, moments)


def polar_axis(n: int, power: int = 1, method: str = "spectral") -> Axis:
    if n % 2:
        raise ValueError("polar axis needs an even node count")
    nodes = (np.arange(n) + 0.5) * 2 * np.pi / n
    d = fourier_diff_matrix(n) if method == "spectral" else fd4_periodic_matrix(n)
    half = n // 2
    weights = np.zeros(n)
    w = _polar_weights(half, power)
    weights[:half] = w / np.sin(nodes[:half]) ** power
    return Axis("polar", nodes, weights, d, period=2 * np.pi, power=power)


def chebyshev(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev-Lobatto nodes (descending on [-1, 1]) and differentiation matrix."""
    m = n - 1
    x = np.cos(np.pi * np.arange(n) / m)
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c = c * (-1.0) ** np.arange(n)
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(n))
    d = d - np.diag(d.sum(axis=1))
    return x, d


def clenshaw_curtis_weights(n: int) -> np.ndarray:
    m = n - 1
    theta = np.pi * np.arange(n) / m
    w = np.zeros(n)
    v = np.ones(n - 2)
    inner = slice(1, n - 1)
    if m % 2 == 0:
        w[0] = w[-1] = 1.0 / (m * m - 1)
        for k in range(1, m // 2):
            v -= 2 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
        v -= np.cos(m * theta[inner]) / (m * m - 1)
    else:
        w[0] = w[-1] = 1.0 / (m * m)
        for k in range(1, (m - 1) // 2 + 1):
            v -= 2 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
    w[inner] = 2 * v / m
    return w


def interval_axis(n: int, a: float, b: float) -> Axis:
    x, d = chebyshev(n)
    half = 0.5 * (b - a)
    nodes = a + half * (1 - x)
    return Axis("interval", nodes, clenshaw_curtis_weights(n) * half, -d / half)


class Grid:
    """Tensor product of axes; field arrays carry grid.shape as leading axes."""

    def __init__(self, axes: list[Axis]):
        self.axes = list(axes)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.size for ax in self.axes)

    @property
    def compact(self) -> bool:
        return all(ax.kind != "interval" for ax in self.axes)

    def mesh(self) -> np.ndarray:
        """Parameter values, shape grid.shape + (ndim,)."""
        return np.stack(np.meshgrid(*[ax.nodes for ax in self.axes], indexing="ij"), axis=-1)

    def weights(self) -> np.ndarray:
        w = np.ones(self.shape)
        for i, ax in enumerate(self.axes):
            shape = [1] * self.ndim
            shape[i] = ax.size
            w = w * ax.weights.reshape(shape)
        return w

    def diff(self, f: np.ndarray, i: int, order: int = 1) -> np.ndarray:
        mat = self.axes[i].diff if order == 1 else self.axes[i].diff2
        return np.moveaxis(np.tensordot(mat, f, axes=(1, i)), 0, i)

    def gradient(self, f: np.ndarray) -> np.ndarray:
        """Partial derivatives stacked on a new trailing axis."""
        return np.stack([self.diff(f, i) for i in range(self.ndim)], axis=-1)

    def integrate(self, f: np.ndarray, density: np.ndarray | None = None) -> float:
        w = self.weights() if density is None else self.weights() * density
        return float(np.sum(w * f))
