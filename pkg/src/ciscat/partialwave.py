"""Flux-line (Aharonov-Bohm-type) scattering with short-range potentials.

A unit flux parameter ``alpha`` shifts every partial-wave Bessel order to
nu = |m - alpha|.  This module provides:

- half-integer Bessel/Hankel evaluation through the closed spherical-Bessel
  relation J_{n+1/2}(x) = sqrt(2x/pi) j_n(x),
- the closed-form alpha = 1/2 flux-line wave (complex error function),
- the energy-independent pure flux-line cross section sin^2(pi alpha)/cos^2(theta/2),
- radial log-derivative integration (Numerov with endpoint correction) and
  matching to exterior Bessel/Hankel combinations,
- total-wave assembly (direct partial-wave sum, and the folded alpha = 1/2
  form that vanishes identically along phi = +-pi),
- far-field amplitude extraction and k dsigma/dtheta tables.

Conventions: the wave is incident from the +x direction (incident factor
e^{-i k x} e^{i phi/2} for alpha = 1/2), phi/theta measured from the +x axis,
so the forward-scattering divergence sits at theta = pi and the nodal ray of
half-integer flux lies along phi = +-pi.  Cross sections are reported as
k dsigma/dtheta = 2 pi k |f|^2, which makes the pure flux-line value exactly
sin^2(pi alpha)/cos^2(theta/2) at every k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np
from scipy.special import erf as _cerf
from scipy.special import h1vp, hankel1, jv, jvp, spherical_jn, spherical_yn

from .errors import (DivergenceError, MatchingError, TruncationError)

__all__ = [
    "RadialPotential", "PartialWaveSolution", "bessel_halfint",
    "hankel1_halfint", "psi_ab", "xs_pure_ab", "radial_logderiv",
    "coefficients", "solve", "psi_total", "ab_amplitude",
    "short_range_amplitude", "differential_cross_section",
]


# ---------------------------------------------------------------------------
# Bessel evaluation
# ---------------------------------------------------------------------------

def _halfint_index(order: float) -> int:
    n = round(order - 0.5)
    if abs(order - (n + 0.5)) > 1e-12 or n < 0:
        raise ValueError(f"order must be a half-integer >= 1/2, got {order}")
    return int(n)


def bessel_halfint(order: float, x):
    """J_{n+1/2}(x) via the closed form sqrt(2x/pi) j_n(x).

    The spherical routine uses stable downward recurrence internally, so the
    evaluation stays accurate at large order/small argument where upward
    recurrence on J would lose digits.
    """
    n = _halfint_index(order)
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise ValueError("bessel_halfint requires x > 0")
    out = np.sqrt(2.0 * x / np.pi) * spherical_jn(n, x)
    return float(out) if out.ndim == 0 else out


def hankel1_halfint(order: float, x):
    """H^(1)_{n+1/2}(x) = sqrt(2x/pi) (j_n(x) + i y_n(x))."""
    n = _halfint_index(order)
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise ValueError("hankel1_halfint requires x > 0")
    out = np.sqrt(2.0 * x / np.pi) * (spherical_jn(n, x)
                                      + 1j * spherical_yn(n, x))
    return complex(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Closed-form flux-line wave and cross section
# ---------------------------------------------------------------------------

def psi_ab(rho, phi, k: float):
    """Exact alpha = 1/2 flux-line wave.

    psi = -e^{i phi/2} e^{-i k rho cos phi} erf(e^{i 3 pi/4} sqrt(2 k rho)
    cos(phi/2)). On the incident side at large k rho the erf factor tends to
    -1 and psi tends to e^{-i k x} e^{i phi/2}; the wave vanishes identically
    along phi = +-pi and at rho = 0.
    """
    if not k > 0:
        raise DivergenceError(f"wavenumber must be positive, got {k}")
    rho = np.asarray(rho, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    if np.any(rho < 0):
        raise DivergenceError("radius must be nonnegative")
    arg = np.exp(0.75j * np.pi) * np.sqrt(2.0 * k * rho) * np.cos(0.5 * phi)
    out = (-np.exp(0.5j * phi) * np.exp(-1j * k * rho * np.cos(phi))
           * _cerf(arg))
    return complex(out) if out.ndim == 0 else out


def _wrap_angle(theta):
    return np.arctan2(np.sin(theta), np.cos(theta))


def xs_pure_ab(alpha: float, theta):
    """Pure flux-line k dsigma/dtheta = sin^2(pi alpha)/cos^2(theta/2).

    Carries no wavenumber argument at all: the curve is the same at every
    collision energy.  Diverges at theta = pi (the incident direction's
    shadow), which is reported, never clamped.
    """
    theta = np.asarray(theta, dtype=np.float64)
    c = np.cos(0.5 * _wrap_angle(theta))
    if np.any(np.abs(c) < 1e-8):
        raise DivergenceError(
            "pure flux-line cross section diverges at theta = pi "
            "(forward direction); evaluate away from it")
    out = np.sin(np.pi * alpha) ** 2 / c**2
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Radial problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialPotential:
    """Short-range radial potential U(r).

    ``kind`` is "smooth" (U regular at the origin, integrated from a series
    start) or "hard-disk" (U = 0 outside an impenetrable disk of radius
    ``disk_radius``; integration starts at the disk edge with R = 0).
    ``range_hint`` bounds the radius beyond which U is negligible.
    """

    kind: str
    u: Optional[Callable] = None
    disk_radius: Optional[float] = None
    range_hint: float = 1.0

    def __post_init__(self):
        if self.kind not in ("smooth", "hard-disk"):
            raise ValueError(f"unknown radial potential kind {self.kind!r}")
        if self.kind == "hard-disk" and not (self.disk_radius or 0) > 0:
            raise ValueError("hard-disk potential needs a positive radius")
        if self.kind == "smooth" and self.u is None:
            raise ValueError("smooth potential needs a callable u(r)")

    @classmethod
    def hard_disk(cls, a: float) -> "RadialPotential":
        return cls(kind="hard-disk", disk_radius=float(a), range_hint=float(a))

    @classmethod
    def smooth(cls, func: Callable, range_hint: float = 1.0) -> "RadialPotential":
        return cls(kind="smooth", u=func, range_hint=float(range_hint))

    @classmethod
    def free(cls) -> "RadialPotential":
        return cls(kind="smooth", u=lambda r: np.zeros_like(np.asarray(r, float)),
                   range_hint=1e-6)

    def value(self, r):
        if self.kind == "hard-disk":
            return np.zeros_like(np.asarray(r, dtype=np.float64))
        return np.asarray(self.u(r), dtype=np.float64)


def radial_logderiv(potential: RadialPotential, nu: float, k: float,
                    r_c: float, n_steps: int = 4096) -> float:
    """Log-derivative y = (dR/dr)/R at r_c of the regular radial solution.

    Works on u = R sqrt(r), which satisfies u'' + Q u = 0 with
    Q = k^2 - U - (nu^2 - 1/4)/r^2 (no first-derivative term), integrated by
    Numerov with per-step renormalization so classically forbidden stretches
    cannot overflow.  Smooth potentials start from the series
    u ~ r^{nu+1/2} (1 + c r^2), c = (U(0) - k^2)/(4 nu + 4); hard disks start
    from u = 0 at the disk edge.  The endpoint derivative uses the ODE-based
    h^2 correction, keeping the returned y at the integrator's O(h^4) order.
    """
    if not (k > 0 and r_c > 0 and nu >= 0):
        raise ValueError("radial_logderiv needs k > 0, r_c > 0, nu >= 0")
    if potential.kind == "hard-disk":
        r_start = float(potential.disk_radius)
        if r_start >= r_c:
            raise MatchingError(
                f"matching radius {r_c} must exceed the disk radius {r_start}")
    else:
        r_start = 0.0
    h = (r_c - r_start) / n_steps
    # one node beyond r_c for the centered endpoint derivative
    r = r_start + h * np.arange(n_steps + 2, dtype=np.float64)

    def q_at(rr):
        # the r = 0 node is never used by the recursion; the floor only keeps
        # the vectorized evaluation free of 0/0 warnings there
        return (k * k - potential.value(rr)
                - (nu * nu - 0.25) / np.maximum(rr, 1e-150) ** 2)

    q = q_at(r)

    if potential.kind == "hard-disk":
        # u(a) = 0, u'(a) = 1 (scale free): series through O(h^4)
        qa = float(q_at(np.array([r_start]))[0])
        dqa = float((q_at(np.array([r_start + h])) [0] - qa) / h)
        u0 = 0.0
        u1 = h - qa * h**3 / 6.0 - dqa * h**4 / 12.0
        start = 0
    else:
        # series start at the first two interior nodes
        p = nu + 0.5
        u00 = float(potential.value(np.array([0.0]))[0])
        c_ser = (u00 - k * k) / (4.0 * nu + 4.0)
        u0 = r[1] ** p * (1.0 + c_ser * r[1] ** 2)
        u1 = r[2] ** p * (1.0 + c_ser * r[2] ** 2)
        start = 1

    w = 1.0 + (h * h / 12.0) * q
    idx0 = start
    ua, ub = u0, u1
    for n in range(idx0 + 1, n_steps + 1):
        uc = ((12.0 - 10.0 * w[n]) * ub - w[n - 1] * ua) / w[n + 1]
        ua, ub = ub, uc
        scale = abs(ub)
        if scale > 1e100:
            ua /= scale
            ub /= scale
    # now ub = u(r_c + h) and ua = u(r_c); redo bookkeeping: after the loop
    # the last computed node is n_steps + 1 in absolute index terms
    u_end_plus = ub      # u at r_c + h
    u_end = ua           # u at r_c
    # recompute u at r_c - h by stepping the recursion backward one node
    n_end = n_steps + 1
    u_end_minus = ((12.0 - 10.0 * w[n_end - 1]) * u_end
                   - w[n_end] * u_end_plus) / w[n_end - 2]
    if u_end == 0.0:
        raise MatchingError(
            "radial solution has a node exactly at the matching radius; "
            "shift r_c")
    q_c = float(q[n_end - 1])
    dq_c = float((q[n_end] - q[n_end - 2]) / (2.0 * h))
    d_central = (u_end_plus - u_end_minus) / (2.0 * h)
    # u''' = -(Q u)' => centered difference overshoots by (h^2/6) u''';
    # solve for u' with the ODE substituted
    du = (d_central + (h * h / 6.0) * dq_c * u_end) / (1.0 - (h * h / 6.0) * q_c)
    y_u = du / u_end
    return float(y_u - 0.5 / r_c)


def coefficients(y_m: float, k: float, r_c: float, alpha: float, m: int):
    """Incident and scattered coefficients (a_m, b_m) for one partial wave.

    a_m = (-i)^{|m - alpha|} fixes the incident combination; matching the
    interior log-derivative y at r_c to a J + b H gives
    b = a (y J - k J') / (k H' - y H), Bessel factors at k r_c with primes
    with respect to the argument.  y_m = +inf encodes a node at r_c itself
    (impenetrable disk matched at its edge), giving b = -a J / H.
    """
    nu = abs(m - alpha)
    a_m = np.exp(-0.5j * np.pi * nu)
    x = k * r_c
    j = jv(nu, x)
    h1 = hankel1(nu, x)
    if math.isinf(y_m):
        denom = h1
        if j == 0.0 or not np.isfinite(denom):
            # order far beyond k r_c: the channel is completely closed
            return complex(a_m), 0.0j
        if abs(denom) < 1e-300:
            raise MatchingError(f"Hankel value vanished at order {nu}, x={x}")
        return complex(a_m), complex(-a_m * j / denom)
    jp = jvp(nu, x)
    hp = h1vp(nu, x)
    denom = k * hp - y_m * h1
    if not np.isfinite(denom):
        # Hankel overflow at enormous order: closed channel, no scattering
        return complex(a_m), 0.0j
    if abs(denom) < 1e-300:
        raise MatchingError(
            f"ill-conditioned matching at m={m} (denominator {abs(denom):.1e})")
    b_m = a_m * (y_m * j - k * jp) / denom
    return complex(a_m), complex(b_m)


@dataclass
class PartialWaveSolution:
    """Matched coefficient tables for m in [-m_max, m_max + 1]."""

    alpha: float
    k: float
    m_max: int
    r_c: float
    a: dict
    b: dict
    y: dict     # keyed by m; shared values for orders with equal |m - alpha|

    def orders(self):
        return sorted(self.a.keys())


def _default_r_c(potential: RadialPotential, k: float) -> float:
    if potential.kind == "hard-disk":
        return float(potential.disk_radius) + 10.0 / k
    return max(5.0 * potential.range_hint, 1.0 / k)


def solve(potential: RadialPotential, k: float, alpha: float = 0.5,
          r_c: Optional[float] = None, m_max: int = 40,
          m_cap: int = 512, tail_tol: float = 1e-12,
          n_steps: int = 4096) -> PartialWaveSolution:
    """Match every partial wave up to a converged truncation order.

    Log-derivative integrations are cached per distinct order nu = |m - alpha|,
    so coefficient symmetries across m values sharing an order hold exactly by
    construction.  m_max grows until the edge |b| falls below
    ``tail_tol * max|b|`` (TruncationError beyond ``m_cap``).

    Hard disks are matched directly at the disk edge (r_c = a, y = inf) when
    no matching radius is given beyond it; an explicit r_c propagates the
    edge condition outward numerically instead, which is the generic path.
    """
    if not k > 0:
        raise DivergenceError(f"wavenumber must be positive, got {k}")
    direct_edge = potential.kind == "hard-disk" and r_c is None
    r_match = (float(potential.disk_radius) if direct_edge
               else (r_c if r_c is not None else _default_r_c(potential, k)))

    y_by_nu: dict = {}

    def y_for(m: int) -> float:
        nu = abs(m - alpha)
        key = round(nu * 2**26)
        if key not in y_by_nu:
            if direct_edge:
                y_by_nu[key] = math.inf
            else:
                y_by_nu[key] = radial_logderiv(potential, nu, k, r_match,
                                               n_steps=n_steps)
        return y_by_nu[key]

    a_tab: dict = {}
    b_tab: dict = {}
    y_tab: dict = {}

    def add_order(m: int):
        y_m = y_for(m)
        a_m, b_m = coefficients(y_m, k, r_match, alpha, m)
        a_tab[m] = a_m
        b_tab[m] = b_m
        y_tab[m] = y_m

    current = m_max
    for m in range(-current, current + 2):
        add_order(m)
    while True:
        bmax = max(abs(v) for v in b_tab.values())
        edge = max(abs(b_tab[-current]), abs(b_tab[current + 1]))
        if bmax == 0.0 or edge <= tail_tol * bmax:
            break
        current += 8
        if current > m_cap:
            raise TruncationError(
                f"partial-wave sum not converged by m_max={m_cap} "
                f"(edge coefficient {edge:.3e} vs max {bmax:.3e})")
        for m in range(-current, -current + 8):
            add_order(m)
        for m in range(current - 6, current + 2):
            add_order(m)
    return PartialWaveSolution(alpha=alpha, k=k, m_max=current, r_c=r_match,
                               a=a_tab, b=b_tab, y=y_tab)


# ---------------------------------------------------------------------------
# Wave assembly and amplitudes
# ---------------------------------------------------------------------------

def _check_radius_converged(solution: PartialWaveSolution, kr_max: float):
    """The coefficient table must out-range the Bessel turn-on at this radius."""
    edge_nu = abs(-solution.m_max - solution.alpha)
    tail = abs(jv(edge_nu, kr_max))
    if tail > 1e-10:
        raise TruncationError(
            f"partial-wave table (m_max={solution.m_max}) too small for "
            f"k r = {kr_max:.3g}: edge Bessel magnitude {tail:.2e}")


def psi_total(r, theta, solution: PartialWaveSolution,
              folded: bool = False):
    """Total wave at (r, theta) from the matched coefficient tables.

    ``folded=True`` (alpha = 1/2 only) pairs m = n+1 with m = -n and uses the
    factor 1 + e^{-i(2n+1) theta}, which vanishes identically at
    theta = +-pi: the nodal ray is structural, independent of k and of the
    short-range potential.  Both assemblies agree to roundoff.
    """
    r = np.asarray(r, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(r * solution.k <= 0):
        raise DivergenceError("psi_total needs r > 0")
    _check_radius_converged(solution, float(np.max(r)) * solution.k)
    kr = solution.k * r
    shape = np.broadcast(r, theta).shape
    out = np.zeros(shape, dtype=np.complex128)
    if folded:
        if abs(solution.alpha - 0.5) > 1e-12:
            raise DivergenceError(
                "folded assembly applies only to alpha = 1/2")
        n = 0
        while n + 1 in solution.a:
            nu = n + 0.5
            radial = (solution.a[n + 1] * jv(nu, kr)
                      + solution.b[n + 1] * hankel1(nu, kr))
            pair = np.exp(1j * (n + 1) * theta) * (
                1.0 + np.exp(-1j * (2 * n + 1) * theta))
            out = out + pair * radial
            n += 1
        return out if out.ndim else complex(out)
    for m in solution.orders():
        nu = abs(m - solution.alpha)
        out = out + np.exp(1j * m * theta) * (
            solution.a[m] * jv(nu, kr) + solution.b[m] * hankel1(nu, kr))
    return out if out.ndim else complex(out)


def ab_amplitude(alpha: float, k: float, theta):
    """Far-field amplitude of the pure flux line (no short-range potential).

    f(theta) = e^{-i pi/4}/sqrt(2 pi k) * i (-1)^{N+1} sin(pi alpha)
               e^{i(N+1/2) theta} / cos(theta/2),  N = floor(alpha),
    zero for integer alpha.  Satisfies 2 pi k |f|^2 =
    sin^2(pi alpha)/cos^2(theta/2) and carries the phase consistent with the
    outgoing-wave convention of the partial-wave sum, so it can be added
    coherently to the short-range amplitude.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if abs(alpha - round(alpha)) < 1e-15:
        return np.zeros(theta.shape, dtype=np.complex128) if theta.ndim else 0j
    c = np.cos(0.5 * _wrap_angle(theta))
    if np.any(np.abs(c) < 1e-8):
        raise DivergenceError(
            "flux-line amplitude diverges at theta = pi; evaluate away from it")
    n_whole = math.floor(alpha)
    pref = (np.exp(-0.25j * np.pi) / math.sqrt(2.0 * np.pi * k)
            * 1j * (-1.0) ** (n_whole + 1) * math.sin(math.pi * alpha))
    out = pref * np.exp(1j * (n_whole + 0.5) * theta) / c
    return out if out.ndim else complex(out)


def short_range_amplitude(solution: PartialWaveSolution, theta):
    """Far-field amplitude of the b_m (outgoing Hankel) sum.

    From H^(1)_nu(kr) -> sqrt(2/(pi k r)) e^{i(kr - nu pi/2 - pi/4)}:
    f(theta) = sqrt(2/(pi k)) e^{-i pi/4} sum_m b_m e^{i m theta - i nu pi/2}.
    """
    theta = np.asarray(theta, dtype=np.float64)
    ms = solution.orders()
    terms = np.stack([
        solution.b[m]
        * np.exp(1j * m * theta - 0.5j * np.pi * abs(m - solution.alpha))
        * np.ones(theta.shape if theta.ndim else (1,), dtype=np.complex128)
        for m in ms])
    total = terms.sum(axis=0)
    out = math.sqrt(2.0 / (math.pi * solution.k)) * np.exp(-0.25j * np.pi) * total
    return out if theta.ndim else complex(out[0])


def differential_cross_section(solution: PartialWaveSolution, theta_samples):
    """k dsigma/dtheta = 2 pi k |f_short + f_flux|^2 on the sample set."""
    theta = np.asarray(theta_samples, dtype=np.float64)
    scalar = theta.ndim == 0
    theta = np.atleast_1d(theta)
    f = short_range_amplitude(solution, theta)
    f = f + ab_amplitude(solution.alpha, solution.k, theta)
    out = 2.0 * np.pi * solution.k * np.abs(f) ** 2
    return float(out[0]) if scalar else out
