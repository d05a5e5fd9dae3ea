"""Gauge structure of two-state crossings.

Given a pair of real functions (h, g) defining the traceless Hamiltonian
[[h, g], [g, -h]], this module computes:

- the ground-channel (Abelian) gauge potential
  A = (h grad g - g grad h) / (2 (g^2 + h^2)),
- the full 2x2 connection A_k = i U^dag d_k U of any single-valued frame U,
- Wilson loops exp(i * closed line integral of A), with the theorem that the
  loop value is (-1)^(number of enclosed crossing points),
- crossing-point location (simultaneous zeros of h and g) and the local sign
  rule sgn(g_y h_x - h_y g_x) that each crossing contributes,
- curl tests verifying the Abelian field is flat away from the crossings.

Conventions: the kinetic operator in the dynamical units used throughout is
-grad^2 (i.e. hbar = 2 mu = 1), so the induced scalar correction is reported
as the plain sum |A_12,x|^2 + |A_12,y|^2.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import (DegenerateCIError, GaugeSingularityError, QuadratureError,
                     UnresolvedCandidateWarning)

__all__ = [
    "LoopPath", "projected_gauge", "abelian_field", "nonabelian_gauge",
    "scalar_correction", "loop_integral", "wilson_loop",
    "wilson_sign_predicted", "find_cis", "curvature_check",
]

#: Paths must keep at least this distance from any crossing point.
EPS_CI = 1e-6

_SINGULAR_S2 = 1e-280


@dataclass(frozen=True)
class LoopPath:
    """Contour (x(t), y(t)), t in [0, 1], with a quadrature hint.

    ``parametrization`` maps an array of t values to coordinate arrays.  For
    ``closed`` paths (the default, required by line integrals) the endpoints
    must coincide to 1e-14.  Open paths, built with :meth:`arc`, carry the
    deliberate gap used to measure windings of fields whose phase is
    discontinuous across a nodal ray.  ``n_samples`` is the starting
    quadrature resolution; integrators double it until converged.
    """

    parametrization: Callable
    n_samples: int = 256
    closed: bool = True

    def __post_init__(self):
        if self.n_samples < 4:
            raise QuadratureError("loop needs at least 4 samples")
        if self.closed:
            x, y = self.parametrization(np.array([0.0, 1.0]))
            gap = float(np.hypot(x[1] - x[0], y[1] - y[0]))
            scale = max(1.0, float(np.hypot(x[0], y[0])))
            if gap > 1e-14 * scale:
                raise QuadratureError(
                    f"path is not closed (endpoint gap {gap:.2e})")

    @classmethod
    def circle(cls, center, radius: float, n_samples: int = 256) -> "LoopPath":
        if not radius > 0:
            raise QuadratureError(f"circle radius must be positive, got {radius}")
        cx, cy = float(center[0]), float(center[1])

        def param(t):
            ang = 2.0 * np.pi * np.asarray(t, dtype=np.float64)
            return cx + radius * np.cos(ang), cy + radius * np.sin(ang)

        return cls(param, n_samples)

    @classmethod
    def arc(cls, center, radius: float, angle_start: float, angle_end: float,
            n_samples: int = 256) -> "LoopPath":
        """Open circular arc from angle_start to angle_end (radians).

        Used for winding measurements that must start just after and end just
        before a nodal ray (e.g. start at phi = -pi + gap/2, end at
        pi - gap/2).
        """
        if not radius > 0:
            raise QuadratureError(f"arc radius must be positive, got {radius}")
        if not angle_end > angle_start:
            raise QuadratureError("arc needs angle_end > angle_start")
        cx, cy = float(center[0]), float(center[1])
        a0, a1 = float(angle_start), float(angle_end)

        def param(t):
            ang = a0 + (a1 - a0) * np.asarray(t, dtype=np.float64)
            return cx + radius * np.cos(ang), cy + radius * np.sin(ang)

        return cls(param, n_samples, closed=False)

    @classmethod
    def polyline(cls, vertices: Sequence, n_samples: int = 1024) -> "LoopPath":
        """Closed polygon through ``vertices`` (auto-closed if needed),
        parametrized by cumulative arc length."""
        pts = np.asarray(vertices, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
            raise QuadratureError("polyline needs at least 3 (x, y) vertices")
        if np.hypot(*(pts[-1] - pts[0])) > 1e-14:
            pts = np.vstack([pts, pts[0]])
        seg = np.diff(pts, axis=0)
        lengths = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(lengths == 0.0):
            raise QuadratureError("polyline has a zero-length segment")
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        total = cum[-1]

        def param(t):
            s = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0) * total
            idx = np.clip(np.searchsorted(cum, s, side="right") - 1,
                          0, len(lengths) - 1)
            frac = (s - cum[idx]) / lengths[idx]
            p = pts[idx] + frac[..., None] * seg[idx]
            return p[..., 0], p[..., 1]

        return cls(param, n_samples)

    def points(self, n: int):
        """n+1 samples around the loop, last coinciding with the first."""
        t = np.arange(n + 1) / n
        return self.parametrization(t)

    def clearance(self, points: Iterable) -> float:
        """Minimum distance from the (densely sampled) path to any point."""
        x, y = self.points(max(self.n_samples, 1024))
        dmin = np.inf
        for px, py in points:
            dmin = min(dmin, float(np.hypot(x - px, y - py).min()))
        return dmin

    def require_clear_of(self, points: Iterable, eps: float = EPS_CI) -> None:
        d = self.clearance(points)
        if d < eps:
            raise GaugeSingularityError(
                f"loop passes within {d:.2e} of a crossing point "
                f"(required clearance {eps:g})")


def _fd_grad(func, x, y, fd_step: float):
    gx = (func(x + fd_step, y) - func(x - fd_step, y)) / (2.0 * fd_step)
    gy = (func(x, y + fd_step) - func(x, y - fd_step)) / (2.0 * fd_step)
    return gx, gy


def projected_gauge(h_func, g_func, x, y, grad_h=None, grad_g=None,
                    fd_step: float = 1e-5):
    """Ground-channel gauge potential A = (h grad g - g grad h) / (2(g^2+h^2)).

    Gradients are analytic when ``grad_h``/``grad_g`` are supplied (callables
    returning (d/dx, d/dy)), else central differences with ``fd_step``.
    Raises if evaluated at a crossing point, where A is singular.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    h = np.asarray(h_func(x, y), dtype=np.float64)
    g = np.asarray(g_func(x, y), dtype=np.float64)
    s2 = h * h + g * g
    if np.any(s2 < _SINGULAR_S2):
        raise GaugeSingularityError(
            "gauge potential requested at a crossing point (h = g = 0)")
    hx, hy = grad_h(x, y) if grad_h is not None else _fd_grad(h_func, x, y, fd_step)
    gx, gy = grad_g(x, y) if grad_g is not None else _fd_grad(g_func, x, y, fd_step)
    denom = 2.0 * s2
    a_x = (h * gx - g * hx) / denom
    a_y = (h * gy - g * hy) / denom
    if not (np.all(np.isfinite(a_x)) and np.all(np.isfinite(a_y))):
        raise GaugeSingularityError("gauge potential is not finite")
    if a_x.ndim == 0:
        return float(a_x), float(a_y)
    return a_x, a_y


def abelian_field(h_func, g_func, grad_h=None, grad_g=None,
                  fd_step: float = 1e-5) -> Callable:
    """Close over (h, g) and return a_func(x, y) -> (A_x, A_y)."""
    def a_func(x, y):
        return projected_gauge(h_func, g_func, x, y,
                               grad_h=grad_h, grad_g=grad_g, fd_step=fd_step)
    return a_func


def _dagger(u: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(u, 0, 1))


def _mat2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ik...,kj...->ij...", a, b)


def nonabelian_gauge(u_func, x, y, fd_step: float = 1e-5):
    """Full connection A_k = i U^dag d_k U by central differences.

    ``u_func(x, y)`` must return the (2, 2)-leading frame array.  The result
    is a pair of 2x2 (per-point) matrices, Hermitian to O(fd_step^2).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    u0 = np.asarray(u_func(x, y))
    dux = (np.asarray(u_func(x + fd_step, y))
           - np.asarray(u_func(x - fd_step, y))) / (2.0 * fd_step)
    duy = (np.asarray(u_func(x, y + fd_step))
           - np.asarray(u_func(x, y - fd_step))) / (2.0 * fd_step)
    a_x = 1j * _mat2(_dagger(u0), dux)
    a_y = 1j * _mat2(_dagger(u0), duy)
    if not (np.all(np.isfinite(a_x)) and np.all(np.isfinite(a_y))):
        raise GaugeSingularityError(
            "frame derivative is not finite (too close to a crossing point)")
    return a_x, a_y


def scalar_correction(u_func, x, y, fd_step: float = 1e-5):
    """Ground-channel scalar induced potential |A_12,x|^2 + |A_12,y|^2.

    This is the back-reaction energy shift from virtual excursions into the
    excited channel, in units where the kinetic operator is -grad^2.
    Diagnostic only; never enters propagation.
    """
    a_x, a_y = nonabelian_gauge(u_func, x, y, fd_step=fd_step)
    val = np.abs(a_x[0, 1]) ** 2 + np.abs(a_y[0, 1]) ** 2
    return float(val) if np.ndim(val) == 0 else val


def loop_integral(a_func, path: LoopPath, tol: float = 1e-8,
                  cap: int = 2 ** 20) -> float:
    """Closed line integral of an Abelian field along ``path``.

    Midpoint-segment rule (A at chord midpoints dotted with chord vectors),
    doubling the sample count until two successive levels agree to ``tol``.
    Spectrally accurate for smooth loops; raises after exceeding ``cap``
    samples without convergence.
    """
    if not path.closed:
        raise QuadratureError("line integrals require a closed path")
    n = max(8, path.n_samples)
    prev = None
    while n <= cap:
        x, y = path.points(n)
        xm = 0.5 * (x[:-1] + x[1:])
        ym = 0.5 * (y[:-1] + y[1:])
        a_x, a_y = a_func(xm, ym)
        phase = float(np.sum(a_x * np.diff(x) + a_y * np.diff(y)))
        if prev is not None and abs(phase - prev) < tol:
            return phase
        prev = phase
        n *= 2
    raise QuadratureError(
        f"loop integral did not converge below {tol:g} within {cap} samples")


def wilson_loop(a_func, path: LoopPath, tol: float = 1e-8) -> complex:
    """exp(i * loop integral); unit modulus by construction."""
    return complex(np.exp(1j * loop_integral(a_func, path, tol=tol)))


def wilson_sign_predicted(h_func, g_func, enclosed_cis: Sequence,
                          grad_h=None, grad_g=None,
                          fd_step: float = 1e-5) -> int:
    """Predicted Wilson loop value from the local linearization at each
    enclosed crossing.

    The loop integral picks up sgn(g_y h_x - h_y g_x) * pi per enclosed
    crossing; exponentiating, each crossing contributes exp(+-i pi) = -1
    regardless of its orientation sign, so the loop value is
    (-1)^(number of enclosed crossings).  The orientation determinant is
    still evaluated at every crossing: the rule only holds for linear
    (nondegenerate) crossings, and a vanishing determinant is an error.
    """
    for (px, py) in enclosed_cis:
        px, py = float(px), float(py)
        hx, hy = (grad_h(px, py) if grad_h is not None
                  else _fd_grad(h_func, px, py, fd_step))
        gx, gy = (grad_g(px, py) if grad_g is not None
                  else _fd_grad(g_func, px, py, fd_step))
        det = float(gy * hx - hy * gx)
        scale = max(abs(float(hx)), abs(float(hy)),
                    abs(float(gx)), abs(float(gy)), 1e-30) ** 2
        if abs(det) < 1e-10 * scale:
            raise DegenerateCIError(
                f"degenerate crossing at ({px:g}, {py:g}): "
                f"g_y h_x - h_y g_x = {det:.3e}")
    return -1 if len(enclosed_cis) % 2 else 1


def find_cis(h_func, g_func, region, grid_resolution: int = 64,
             grad_h=None, grad_g=None, fd_step: float = 1e-6,
             tol: float = 1e-12, dedupe: float = 1e-8):
    """Locate all simultaneous zeros of (h, g) inside a rectangle.

    ``region`` is ((x_min, x_max), (y_min, y_max)).  Cells of a coarse scan
    where both h and g change sign seed 2D Newton iterations (analytic
    Jacobian when gradients are supplied, else central differences).  Each
    root is refined to |h| + |g| < ``tol``; duplicates within ``dedupe`` are
    merged.  Candidates whose Newton iteration fails are reported with an
    :class:`UnresolvedCandidateWarning`, never silently dropped.
    """
    (x_min, x_max), (y_min, y_max) = region
    if not (x_max > x_min and y_max > y_min):
        raise GaugeSingularityError(f"empty search region {region!r}")
    xs = np.linspace(x_min, x_max, grid_resolution + 1)
    ys = np.linspace(y_min, y_max, grid_resolution + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    hh = np.asarray(h_func(xx, yy), dtype=np.float64)
    gg = np.asarray(g_func(xx, yy), dtype=np.float64)

    def cell_extrema(f):
        corners = (f[:-1, :-1], f[1:, :-1], f[:-1, 1:], f[1:, 1:])
        return np.minimum.reduce(corners), np.maximum.reduce(corners)

    hmin, hmax = cell_extrema(hh)
    gmin, gmax = cell_extrema(gg)
    cand = (hmin <= 0) & (hmax >= 0) & (gmin <= 0) & (gmax >= 0)
    roots = []
    margin_x = (xs[1] - xs[0])
    margin_y = (ys[1] - ys[0])
    for i, j in zip(*np.nonzero(cand)):
        px = 0.5 * (xs[i] + xs[i + 1])
        py = 0.5 * (ys[j] + ys[j + 1])
        ok = False
        for _ in range(60):
            hv = float(h_func(px, py))
            gv = float(g_func(px, py))
            if abs(hv) + abs(gv) < tol:
                ok = True
                break
            hx, hy = (grad_h(px, py) if grad_h is not None
                      else _fd_grad(h_func, px, py, fd_step))
            gx, gy = (grad_g(px, py) if grad_g is not None
                      else _fd_grad(g_func, px, py, fd_step))
            det = float(hx) * float(gy) - float(hy) * float(gx)
            if det == 0.0 or not np.isfinite(det):
                break
            dx = (-float(hv) * float(gy) + float(gv) * float(hy)) / det
            dy = (-float(gv) * float(hx) + float(hv) * float(gx)) / det
            px, py = px + dx, py + dy
            if not (np.isfinite(px) and np.isfinite(py)):
                break
        if not ok:
            warnings.warn(
                f"crossing candidate near cell ({xs[i]:.4g}, {ys[j]:.4g}) "
                "did not converge under Newton refinement",
                UnresolvedCandidateWarning, stacklevel=2)
            continue
        if not (x_min - margin_x <= px <= x_max + margin_x
                and y_min - margin_y <= py <= y_max + margin_y):
            continue
        if all(np.hypot(px - rx, py - ry) > dedupe for rx, ry in roots):
            roots.append((float(px), float(py)))
    roots.sort()
    return roots


def curvature_check(a_func, region, n_samples: int = 32,
                    fd_step: float = 1e-4, exclude: Sequence = (),
                    exclusion_radius: float = 0.1) -> float:
    """Max |curl A| = |d_x A_y - d_y A_x| over a sample grid.

    Points within ``exclusion_radius`` of any ``exclude`` location are
    skipped (the field is singular there); the radius is padded by the
    finite-difference stencil size.
    """
    (x_min, x_max), (y_min, y_max) = region
    xs = np.linspace(x_min, x_max, n_samples)
    ys = np.linspace(y_min, y_max, n_samples)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    keep = np.ones(xx.shape, dtype=bool)
    pad = exclusion_radius + 2.0 * fd_step
    for (px, py) in exclude:
        keep &= np.hypot(xx - px, yy - py) > pad
    x = xx[keep]
    y = yy[keep]
    if x.size == 0:
        raise QuadratureError("curvature check has no admissible sample points")
    _, ay_p = a_func(x + fd_step, y)
    _, ay_m = a_func(x - fd_step, y)
    ax_p, _ = a_func(x, y + fd_step)
    ax_m, _ = a_func(x, y - fd_step)
    curl = (ay_p - ay_m) / (2.0 * fd_step) - (ax_p - ax_m) / (2.0 * fd_step)
    return float(np.max(np.abs(curl)))
