"""Catalog of two-state crossing Hamiltonians and their diagonalizers.

Every model is a traceless Hermitian 2x2 field

    H(x, y) = [[h, c], [conj(c), -h]]

with real diagonal h(x, y) and (possibly complex) coupling c(x, y), so the
eigenvalues are -E and +E with E = sqrt(h^2 + |c|^2).  Each catalog entry
also carries a *single-valued* diagonalizing unitary: its columns are the
(excited, ground) eigenvectors, chosen with complex phases so that the frame
returns to itself after a full turn around a crossing point (unlike the
real-rotation frame, which flips sign).

Catalog:

- ``linear_jt``          h = x,  c = y                 (bare linear cone)
- ``capped_jt``          h = Xi*x, c = Xi*y            (cone capped at delta)
- ``twisted_capped_jt``  h = Xi*x, c = Xi*y*e^{-i phi} (same surfaces, no
                                                        ground-frame holonomy)
- ``two_ci``             h = x*(x0 - x), c = y         (crossings at (0,0)
                                                        and (x0, 0))

with Xi(rho) = delta / max(rho, rho0), which flattens the cone into two
parallel surfaces at +-delta beyond radius rho0.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .errors import FieldError, SingularBasisError

__all__ = [
    "xi_factor", "u_c", "u_d", "u_general", "BarrierSpec", "barrier_value",
    "TwoStatePotential", "linear_jt", "capped_jt", "twisted_capped_jt",
    "two_ci", "catalog",
]


def xi_factor(rho, rho0: float, delta: float):
    """Radial cap factor: delta/rho beyond rho0, delta/rho0 inside.

    Multiplying (x, y) by this factor caps the linear-cone eigenvalues at
    +-delta outside radius rho0 while keeping them linear inside.  Continuous
    at rho = rho0 (both branches give delta/rho0), so the Heaviside split is
    equivalent to delta / max(rho, rho0).
    """
    rho = np.asarray(rho, dtype=np.float64)
    if not rho0 > 0:
        raise FieldError(f"cap radius must be positive, got {rho0}")
    if np.any(rho < 0):
        raise FieldError("radius must be nonnegative")
    out = delta / np.maximum(rho, rho0)
    return out if out.ndim else float(out)


def u_c(phi):
    """Single-valued diagonalizer of [[x, y], [y, -x]], phi = atan2(y, x).

    Columns are the (+E, -E) eigenvectors of the linear cone; the e^{+-i
    phi/2} prefactors compensate the sign flip of the half-angle rotation so
    u_c(phi + 2 pi) = u_c(phi).  Shape (2, 2) + shape(phi).
    """
    phi = np.asarray(phi, dtype=np.float64)
    half = 0.5 * phi
    c, s = np.cos(half), np.sin(half)
    ep = np.exp(0.5j * phi)
    em = np.conj(ep)
    return np.array([[ep * c, -em * s],
                     [ep * s, em * c]])


def u_d(phi):
    """Single-valued diagonalizer of the twisted cone (coupling y e^{-i phi}).

    Same half-angle structure as :func:`u_c` but with phase dressing
    e^{+-i sin(phi)/2} and the opposite assignment of e^{+-i phi/2} between
    rows, which makes the induced connection purely off-diagonal: the ground
    channel sees no geometric flux.  Shape (2, 2) + shape(phi).
    """
    phi = np.asarray(phi, dtype=np.float64)
    half = 0.5 * phi
    c, s = np.cos(half), np.sin(half)
    w = np.exp(0.5j * np.sin(phi))
    ep = np.exp(0.5j * phi)
    em = np.conj(ep)
    return np.array([[w * em * c, -np.conj(w) * em * s],
                     [w * ep * s, np.conj(w) * ep * c]])


def u_general(h, g):
    """Single-valued diagonalizer of [[h, g], [g, -h]] for real h, g.

    Built from the complex combinations (real + i * real) of the two real
    eigenvector branches, normalized by 2E; reduces exactly to
    ``u_c(atan2(g, h))`` and satisfies U diag(E, -E) U^dag = [[h, g], [g, -h]].
    Undefined where h = g = 0 (a crossing point).
    """
    h = np.asarray(h, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    s = np.hypot(h, g)
    if np.any(s == 0.0):
        raise SingularBasisError(
            "diagonalizer requested at a crossing point (h = g = 0)")
    d = 0.5 / s
    return np.array([[d * (h + s + 1j * g), d * (-g - 1j * (h - s))],
                     [d * (g + 1j * (s - h)), d * (h + s - 1j * g)]])


@dataclass(frozen=True)
class BarrierSpec:
    """Radial super-Gaussian obstacle added to both diagonal entries."""
    height: float
    radius: float

    def __post_init__(self):
        if not self.height >= 0:
            raise FieldError(f"barrier height must be >= 0, got {self.height}")
        if not self.radius > 0:
            raise FieldError(f"barrier radius must be > 0, got {self.radius}")


def barrier_value(spec: BarrierSpec, x, y):
    """height * exp(-(r/radius)^8): flat-topped, steep, smooth scalar bump."""
    r2 = np.asarray(x, dtype=np.float64) ** 2 + np.asarray(y, np.float64) ** 2
    out = spec.height * np.exp(-((r2 / spec.radius**2) ** 4))
    return out if np.ndim(out) else float(out)


@dataclass
class TwoStatePotential:
    """A traceless Hermitian 2x2 field plus its single-valued eigenframe.

    ``h`` and ``c`` are vectorized callables of (x, y).  ``unitary(x, y)``
    returns the (2, 2) + shape diagonalizer whose columns are the (excited,
    ground) eigenvectors.  ``grad_h``/``grad_g`` are analytic gradients
    (callables returning (d/dx, d/dy)) for models with real coupling; None
    means finite differences downstream.  ``barrier`` is an optional scalar
    obstacle applied to both channels (it commutes with the 2x2 structure and
    does not affect the eigenframe).
    """

    label: str
    h: Callable
    c: Callable
    unitary: Callable
    params: dict = dc_field(default_factory=dict)
    grad_h: Optional[Callable] = None
    grad_g: Optional[Callable] = None
    barrier: Optional[BarrierSpec] = None
    coupling_is_real: bool = True

    def splitting(self, x, y):
        """E(x, y) = sqrt(h^2 + |c|^2); the gap to either branch."""
        return np.sqrt(np.asarray(self.h(x, y), np.float64) ** 2
                       + np.abs(self.c(x, y)) ** 2)

    def eigenvalues(self, x, y):
        """(e_minus, e_plus) = (-E, +E), ground branch first."""
        e = self.splitting(x, y)
        return -e, e

    def hamiltonian(self, x, y) -> np.ndarray:
        """Matrix field [[h, c], [conj(c), -h]], shape (2, 2) + shape(x)."""
        hv = np.asarray(self.h(x, y), dtype=np.complex128)
        cv = np.asarray(self.c(x, y), dtype=np.complex128)
        return np.array([[hv, cv], [np.conj(cv), -hv]])

    def scalar_potential(self, x, y):
        """Barrier contribution common to both channels (0 if no barrier)."""
        if self.barrier is None:
            return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return barrier_value(self.barrier, x, y)


def linear_jt() -> TwoStatePotential:
    """Bare linear cone: h = x, c = y; eigenvalues -+ rho."""
    return TwoStatePotential(
        label="linear_jt",
        h=lambda x, y: np.asarray(x, np.float64) + 0.0 * np.asarray(y),
        c=lambda x, y: np.asarray(y, np.float64) + 0.0 * np.asarray(x),
        unitary=lambda x, y: u_general(
            np.asarray(x, np.float64) + 0.0 * np.asarray(y),
            np.asarray(y, np.float64) + 0.0 * np.asarray(x)),
        params={},
        grad_h=lambda x, y: (np.ones_like(np.asarray(x, np.float64)),
                             np.zeros_like(np.asarray(x, np.float64))),
        grad_g=lambda x, y: (np.zeros_like(np.asarray(x, np.float64)),
                             np.ones_like(np.asarray(x, np.float64))),
    )


def _capped_pair(delta: float, rho0: float):
    def h(x, y):
        x = np.asarray(x, np.float64)
        y = np.asarray(y, np.float64)
        return xi_factor(np.hypot(x, y), rho0, delta) * x

    def c(x, y):
        x = np.asarray(x, np.float64)
        y = np.asarray(y, np.float64)
        return xi_factor(np.hypot(x, y), rho0, delta) * y

    return h, c


def capped_jt(delta: float = 1.0, rho0: float = 5.0) -> TwoStatePotential:
    """Capped cone: h = Xi x, c = Xi y; flat +-delta landscape beyond rho0."""
    h, c = _capped_pair(delta, rho0)
    return TwoStatePotential(
        label="capped_jt",
        h=h,
        c=c,
        unitary=lambda x, y: u_c(np.arctan2(y, x)),
        params={"delta": delta, "rho0": rho0},
    )


def twisted_capped_jt(delta: float = 1.0, rho0: float = 5.0) -> TwoStatePotential:
    """Same eigensurfaces as capped_jt but coupling twisted by e^{-i phi}.

    The twist removes the ground-channel geometric flux while leaving every
    eigenvalue untouched, so scattering envelopes match capped_jt while the
    phase topology differs.
    """
    h, _ = _capped_pair(delta, rho0)

    def c(x, y):
        x = np.asarray(x, np.float64)
        y = np.asarray(y, np.float64)
        phi = np.arctan2(y, x)
        return xi_factor(np.hypot(x, y), rho0, delta) * y * np.exp(-1j * phi)

    return TwoStatePotential(
        label="twisted_capped_jt",
        h=h,
        c=c,
        unitary=lambda x, y: u_d(np.arctan2(y, x)),
        params={"delta": delta, "rho0": rho0},
        coupling_is_real=False,
    )


def two_ci(x0: float = 3.0,
           delta: Optional[float] = None,
           cap: Optional[float] = None,
           barrier: Optional[BarrierSpec] = None) -> TwoStatePotential:
    """Two crossing points: h = x (x0 - x), c = y; zeros at (0,0), (x0,0).

    With ``delta`` and ``cap`` set, (h, c) are rescaled by
    delta / max(E_raw, cap), which caps the splitting at delta where the raw
    splitting E_raw exceeds ``cap`` and leaves it proportional (slope
    delta/cap) below — the same flattening recipe as the capped cone, applied
    in splitting space.  The rescale is a positive scalar, so the eigenframe
    and all loop holonomies are identical to the raw model's.
    """
    def h_raw(x, y):
        x = np.asarray(x, np.float64)
        return x * (x0 - x) + 0.0 * np.asarray(y)

    def g_raw(x, y):
        return np.asarray(y, np.float64) + 0.0 * np.asarray(x)

    if (delta is None) != (cap is None):
        raise FieldError("two_ci: delta and cap must be given together")

    if delta is None:
        h_fn, c_fn = h_raw, g_raw
        params = {"x0": x0}
        grad_h = lambda x, y: (x0 - 2.0 * np.asarray(x, np.float64),
                               np.zeros_like(np.asarray(x, np.float64)))
        grad_g = lambda x, y: (np.zeros_like(np.asarray(x, np.float64)),
                               np.ones_like(np.asarray(x, np.float64)))
    else:
        if not (delta > 0 and cap > 0):
            raise FieldError("two_ci: delta and cap must be positive")

        def scale(x, y):
            e_raw = np.hypot(h_raw(x, y), g_raw(x, y))
            return delta / np.maximum(e_raw, cap)

        h_fn = lambda x, y: scale(x, y) * h_raw(x, y)
        c_fn = lambda x, y: scale(x, y) * g_raw(x, y)
        params = {"x0": x0, "delta": delta, "cap": cap}
        grad_h = grad_g = None

    return TwoStatePotential(
        label="two_ci",
        h=h_fn,
        c=c_fn,
        unitary=lambda x, y: u_general(h_raw(x, y), g_raw(x, y)),
        params=params,
        grad_h=grad_h,
        grad_g=grad_g,
        barrier=barrier,
    )


def catalog() -> dict:
    """Factory table keyed by model label (default parameters)."""
    return {
        "linear_jt": linear_jt,
        "capped_jt": capped_jt,
        "twisted_capped_jt": twisted_capped_jt,
        "two_ci": two_ci,
    }
