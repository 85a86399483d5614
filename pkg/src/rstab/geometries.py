"""
Concrete leaves and foliations used by the scenarios and tests.

Round spheres S^m are parametrized by angles (theta_1, ..., theta_{m-1}, phi)
on a double cover: every angle is treated as 2 pi-periodic, the latitude
angles as :func:`~rstab.grids.polar_axis` so that quadrature only counts
one sheet. The immersion is a trigonometric polynomial, hence smooth on
the whole parameter torus, and nodes never hit a pole.
"""

from __future__ import annotations

from functools import partial

import numpy as np

from rstab.ambient import AmbientChart, WarpedSpec, make_euclidean, make_warped
from rstab.errors import InvalidSpec
from rstab.grids import Grid, interval_axis, periodic_axis, polar_axis
from rstab.hypersurface import FoliationSlice, LeafPatch, build_leaf


def sphere_map(u: np.ndarray) -> np.ndarray:
    """Unit S^m in R^{m+1} from angles (theta_1..theta_{m-1}, phi), m = u.shape[-1]."""
    m = u.shape[-1]
    out = []
    prod = np.ones(u.shape[:-1])
    for k in range(m - 1):
        out.append(prod * np.cos(u[..., k]))
        prod = prod * np.sin(u[..., k])
    out.append(prod * np.cos(u[..., -1]))
    out.append(prod * np.sin(u[..., -1]))
    return np.stack(out, axis=-1)


def sphere_axes(m: int, size: int, method: str = "spectral") -> list:
    axes = [polar_axis(size, power=m - 1 - k, method=method) for k in range(m - 1)]
    axes.append(periodic_axis(size, method=method))
    return axes


def _radial(x, centre, sign):
    return sign * (x - centre)


def sphere_leaf(m: int = 2, radius: float = 1.0, size: int = 32, orientation: str = "inward",
                method: str = "spectral", centre=None) -> LeafPatch:
    """Round sphere S^m(radius) in Euclidean R^{m+1}."""
    centre = np.zeros(m + 1) if centre is None else np.asarray(centre, dtype=float)
    chart = make_euclidean(m + 1, centre - 2 * radius - 1, centre + 2 * radius + 1)
    sign = -1.0 if orientation == "inward" else 1.0
    return build_leaf(chart, lambda u: centre + radius * sphere_map(u),
                      Grid(sphere_axes(m, size, method)),
                      partial(_radial, centre=centre, sign=sign), orientation,
                      label=f"sphere S^{m}({radius:g})")


def ellipsoid_leaf(semi_axes=(1.0, 1.2, 0.8), size: int = 48, orientation: str = "inward",
                   method: str = "spectral") -> LeafPatch:
    """Ellipsoid in R^3; its mean curvatures are not constant."""
    semi = np.asarray(semi_axes, dtype=float)
    extent = float(np.max(semi)) * 2 + 1
    chart = make_euclidean(3, -extent * np.ones(3), extent * np.ones(3))
    sign = -1.0 if orientation == "inward" else 1.0
    return build_leaf(chart, lambda u: semi * sphere_map(u), Grid(sphere_axes(2, size, method)),
                      partial(_radial, centre=np.zeros(3), sign=sign), orientation,
                      label=f"ellipsoid{tuple(semi_axes)}")


def cylinder_chart(n: int, m: int, radius: float, length: float) -> AmbientChart:
    d = n + 1
    lower = np.concatenate([-(2 * radius + 1) * np.ones(m + 1), np.zeros(n - m)])
    upper = np.concatenate([(2 * radius + 1) * np.ones(m + 1), length * np.ones(n - m)])
    periodic = [False] * (m + 1) + [True] * (n - m)
    return make_euclidean(d, lower, upper, periodic, name="euclidean-cylinder")


def _cylinder_normal(x, m, sign):
    xs = x[..., : m + 1]
    out = np.zeros_like(x)
    out[..., : m + 1] = sign * xs / np.linalg.norm(xs, axis=-1, keepdims=True)
    return out


def cylinder_leaf(n: int, m: int, radius: float = 1.0, length: float = 2 * np.pi,
                  size: int = 16, orientation: str = "inward", method: str = "spectral",
                  chart: AmbientChart | None = None) -> LeafPatch:
    """S^m(radius) x T^{n-m} in R^{m+1} x T^{n-m}; the torus truncates R^{n-m}."""
    if not 1 <= m <= n:
        raise InvalidSpec("cylinder needs 1 <= m <= n")
    chart = chart or cylinder_chart(n, m, radius, length)
    axes = sphere_axes(m, size, method) + [periodic_axis(size, length, method=method)
                                           for _ in range(n - m)]

    def immersion(u):
        return np.concatenate([radius * sphere_map(u[..., :m]), u[..., m:]], axis=-1)

    sign = -1.0 if orientation == "inward" else 1.0
    return build_leaf(chart, immersion, Grid(axes), partial(_cylinder_normal, m=m, sign=sign),
                      orientation, label=f"cylinder S^{m}({radius:g}) x T^{n - m}")


def cylinder_slice(n: int, m: int, radius: float = 1.0, length: float = 2 * np.pi,
                   size: int = 16, orientation: str = "inward", method: str = "spectral",
                   max_radius: float | None = None) -> FoliationSlice:
    """A regular leaf of the concentric-cylinder foliation of R^{m+1} x T^{n-m}."""
    max_radius = max(radius, max_radius or radius)
    chart = cylinder_chart(n, m, max_radius, length)
    leaf = cylinder_leaf(n, m, radius, length, size, orientation, method, chart)
    sign = 1.0 if orientation == "inward" else -1.0

    def kappa_of(rad):
        return np.concatenate([np.full(m, sign / rad), np.zeros(n - m)])

    return FoliationSlice(leaf, radius, kappa_of, -sign,
                          partial(_cylinder_normal, m=m, sign=-sign),
                          label=leaf.label, family="cylinders")


def _warped_normal(x, sign):
    out = np.zeros_like(x)
    out[..., 0] = sign
    return out


def warped_leaf(spec: WarpedSpec, t: float, size: int = 16, interval_size: int = 128,
                orientation: str = "+t", method: str = "spectral",
                chart: AmbientChart | None = None) -> LeafPatch:
    """The slice {t} x L of a warped chart, with N = +-d/dt."""
    chart = chart or make_warped(spec)
    axes = []
    for i in range(spec.n):
        if i in spec.interval_axes:
            axes.append(interval_axis(interval_size, *spec.y_interval))
        else:
            axes.append(periodic_axis(size, spec.period, method=method))

    def immersion(u):
        return np.concatenate([np.full(u.shape[:-1] + (1,), float(t)), u], axis=-1)

    sign = 1.0 if orientation == "+t" else -1.0
    return build_leaf(chart, immersion, Grid(axes), partial(_warped_normal, sign=sign),
                      orientation, label=f"{chart.name} slice t={t:g}")


def warped_slice(spec: WarpedSpec, t: float, size: int = 16, interval_size: int = 128,
                 orientation: str = "+t", method: str = "spectral",
                 chart: AmbientChart | None = None) -> FoliationSlice:
    chart = chart or make_warped(spec)
    leaf = warped_leaf(spec, t, size, interval_size, orientation, method, chart)
    sign = 1.0 if orientation == "+t" else -1.0
    return FoliationSlice(leaf, float(t), lambda tt: spec.leaf_kappa(tt, sign), sign,
                          partial(_warped_normal, sign=sign), label=leaf.label,
                          family=chart.name)
